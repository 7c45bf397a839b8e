//! Case lists for the comparison mode.
//!
//! A spec is a comma-separated list of items. Each item is either a case
//! `variant:tracking:mode:t_mpc_hours[:t_r_hours]`, for example
//! `proposed:wt:rolling:48:48` or `trad:nt:shrinking:24`, or one of the
//! keywords `shrinking` and `rolling` (the 10-case matrix of that mode
//! preceded by EMPC* with WT) or `all` (both).

use crate::controllers::{ControllerSpec, PeakLowering, Tracking, Variant};
use crate::timegrid::{HorizonMode, TimeGrid};
use crate::{Error, Result};

use super::config::{ControllerSection, LoweringName};

pub fn parse_cases(spec: &str, grid: &TimeGrid, lowering: PeakLowering) -> Result<Vec<ControllerSpec>> {
    let spd = grid.steps_per_day();
    let mut out: Vec<ControllerSpec> = Vec::new();
    let table = |mode: HorizonMode| -> Result<Vec<ControllerSpec>> {
        let mut v = vec![ControllerSpec::empc_star(
            Tracking::Wt,
            crate::timegrid::HorizonSpec::from_hours(grid, mode, 24).map_err(|e| Error::Config(e.to_string()))?,
        )];
        v.extend(ControllerSpec::matrix(spd, mode));
        Ok(v)
    };
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "all" => {
                out.extend(table(HorizonMode::Shrinking)?);
                out.extend(table(HorizonMode::Rolling)?);
            }
            "shrinking" => out.extend(table(HorizonMode::Shrinking)?),
            "rolling" => out.extend(table(HorizonMode::Rolling)?),
            _ => out.push(parse_case(item, grid)?),
        }
    }
    if out.is_empty() {
        return Err(Error::Config(format!("case spec `{spec}` names no cases")));
    }
    for c in &mut out {
        c.lowering = lowering;
    }
    let mut seen = std::collections::HashSet::new();
    for c in &out {
        if !seen.insert(c.slug(spd)) {
            return Err(Error::Config(format!("case {} listed twice", c.slug(spd))));
        }
    }
    Ok(out)
}

fn parse_case(item: &str, grid: &TimeGrid) -> Result<ControllerSpec> {
    let bad = |why: &str| Error::Config(format!("bad case `{item}`: {why}"));
    let parts: Vec<&str> = item.split(':').collect();
    if !(4..=5).contains(&parts.len()) {
        return Err(bad("expected variant:tracking:mode:t_mpc[:t_r]"));
    }
    let variant = match parts[0] {
        "trad" => Variant::Trad,
        "proposed" | "empc" => Variant::Proposed,
        "empc_star" | "empc*" => Variant::EmpcStar,
        _ => return Err(bad("variant must be trad, proposed or empc_star")),
    };
    let tracking = match parts[1] {
        "nt" => Tracking::Nt,
        "wt" => Tracking::Wt,
        _ => return Err(bad("tracking must be nt or wt")),
    };
    let mode = match parts[2] {
        "shrinking" => HorizonMode::Shrinking,
        "rolling" => HorizonMode::Rolling,
        _ => return Err(bad("mode must be shrinking or rolling")),
    };
    let hours = |s: &str| s.parse::<u32>().map_err(|_| bad("horizons are whole hours"));
    let section = ControllerSection {
        variant,
        tracking,
        mode,
        t_mpc_hours: hours(parts[3])?,
        t_r_hours: parts.get(4).map(|s| hours(s)).transpose()?,
        lowering: LoweringName::default(),
    };
    section.spec(grid).map_err(|e| bad(&e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn grid() -> TimeGrid {
        TimeGrid::new(NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(), 31, 15).unwrap()
    }

    #[test]
    fn keywords_expand_in_table_order() {
        let g = grid();
        let all = parse_cases("all", &g, PeakLowering::Segment).unwrap();
        assert_eq!(all.len(), 22);
        let labels: Vec<String> = parse_cases("shrinking", &g, PeakLowering::Segment)
            .unwrap()
            .iter()
            .map(|c| c.label(96))
            .collect();
        assert_eq!(labels[0], "EMPC*_WT M24 shrinking");
        assert_eq!(labels[1], "Trad_NT M24 shrinking");
        assert_eq!(labels[4], "Proposed_WT R24/M24 shrinking");
        assert_eq!(labels[10], "Proposed_WT R48/M48 shrinking");
    }

    #[test]
    fn explicit_cases() {
        let g = grid();
        let cs = parse_cases(
            "proposed:wt:rolling:48:48, trad:nt:shrinking:24",
            &g,
            PeakLowering::PerStep,
        )
        .unwrap();
        assert_eq!(cs[0].slug(96), "proposed_wt_rolling_m48_r48");
        assert_eq!(cs[0].lowering, PeakLowering::PerStep);
        assert_eq!(cs[1].slug(96), "trad_nt_shrinking_m24");
        for bad in [
            "",
            "trad:nt:shrinking",
            "trad:xx:shrinking:24",
            "proposed:wt:rolling:24:12",
            "trad:nt:rolling:24:24",
            "trad:nt:rolling:25",
            "rolling,trad:nt:rolling:24",
        ] {
            assert!(parse_cases(bad, &g, PeakLowering::Segment).is_err(), "{bad}");
        }
    }
}
