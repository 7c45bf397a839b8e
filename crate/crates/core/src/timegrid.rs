//! Discrete calendar: steps, days, billing months, on-peak periods and the
//! prediction/reference horizon windows.

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub const MINUTES_PER_DAY: u32 = 1440;

/// On-peak demand window, minutes after midnight, half-open.
pub const OP_START_MINUTE: u32 = 16 * 60;
pub const OP_END_MINUTE: u32 = 21 * 60;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeGrid {
    start_date: NaiveDate,
    step_minutes: u32,
    steps_per_day: usize,
    n_days: usize,
    /// Billing month of each day, plus one trailing entry for the day after
    /// the simulation end.
    day_month: Vec<usize>,
    /// First step of every billing month touched by the grid.
    month_starts: Vec<usize>,
}

impl TimeGrid {
    pub fn new(start_date: NaiveDate, n_days: usize, step_minutes: u32) -> Result<Self> {
        if step_minutes == 0 || !MINUTES_PER_DAY.is_multiple_of(step_minutes) {
            return Err(Error::Grid(format!("step of {step_minutes} min does not divide a day")));
        }
        if n_days == 0 {
            return Err(Error::Grid("grid needs at least one day".into()));
        }
        let steps_per_day = (MINUTES_PER_DAY / step_minutes) as usize;

        let mut day_month = Vec::with_capacity(n_days + 1);
        let mut month_starts = vec![0];
        let mut month = 0;
        for d in 0..=n_days {
            let date = start_date + Duration::days(d as i64);
            if d > 0 && date.day() == 1 {
                month += 1;
                if d < n_days {
                    month_starts.push(d * steps_per_day);
                }
            }
            day_month.push(month);
        }

        Ok(Self {
            start_date,
            step_minutes,
            steps_per_day,
            n_days,
            day_month,
            month_starts,
        })
    }

    pub fn start_date(&self) -> NaiveDate {
        self.start_date
    }

    pub fn step_minutes(&self) -> u32 {
        self.step_minutes
    }

    /// Step length in hours (ΔT).
    pub fn dt_hours(&self) -> f64 {
        f64::from(self.step_minutes) / 60.0
    }

    pub fn steps_per_day(&self) -> usize {
        self.steps_per_day
    }

    pub fn n_days(&self) -> usize {
        self.n_days
    }

    pub fn n_steps(&self) -> usize {
        self.n_days * self.steps_per_day
    }

    pub fn n_months(&self) -> usize {
        self.month_starts.len()
    }

    pub fn day(&self, t: usize) -> usize {
        t / self.steps_per_day
    }

    pub fn minute_of_day(&self, t: usize) -> u32 {
        (t % self.steps_per_day) as u32 * self.step_minutes
    }

    pub fn is_midnight(&self, t: usize) -> bool {
        t.is_multiple_of(self.steps_per_day)
    }

    /// Billing month index of step `t`. `t == n_steps` is the virtual step one
    /// past the end; it belongs to a new month only if it starts one.
    pub fn month(&self, t: usize) -> usize {
        self.day_month[self.day(t).min(self.n_days)]
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start_date.and_hms_opt(0, 0, 0).unwrap() + Duration::minutes(t as i64 * i64::from(self.step_minutes))
    }

    /// Calendar date of the first day of month `m`.
    pub fn month_date(&self, m: usize) -> NaiveDate {
        let start = self.month_starts[m];
        self.start_date + Duration::days(self.day(start) as i64)
    }

    /// Steps of billing month `m`, clipped to the grid.
    pub fn month_range(&self, m: usize) -> std::ops::Range<usize> {
        let start = self.month_starts[m];
        let end = self.month_starts.get(m + 1).copied().unwrap_or(self.n_steps());
        start..end
    }

    /// Whether month `m` is cut short by the simulation end.
    pub fn month_is_partial(&self, m: usize) -> bool {
        let range = self.month_range(m);
        let first = self.start_date + Duration::days(self.day(range.start) as i64);
        let after = self.start_date + Duration::days(self.day(range.end) as i64);
        let complete_start = first.day() == 1;
        let complete_end = after.day() == 1;
        !(complete_start && complete_end)
    }

    /// Last grid step of the month containing `t` (τ_NC,t = τ_OP,t).
    pub fn month_end(&self, t: usize) -> usize {
        self.month_range(self.month(t)).end - 1
    }

    /// Last step of day `d`, clipped to the grid.
    pub fn day_end(&self, d: usize) -> usize {
        ((d + 1) * self.steps_per_day).min(self.n_steps()) - 1
    }

    fn check(&self, t: usize, allow_end: bool) -> Result<()> {
        let n = self.n_steps();
        if t < n || (allow_end && t == n) {
            Ok(())
        } else {
            Err(Error::StepOutOfRange { t, n_steps: n })
        }
    }

    pub fn is_op_period(&self, t: usize) -> Result<bool> {
        self.check(t, false)?;
        Ok(self.in_op(t))
    }

    /// Unchecked on-peak membership; valid for any `t`.
    pub fn in_op(&self, t: usize) -> bool {
        let m = self.minute_of_day(t);
        (OP_START_MINUTE..OP_END_MINUTE).contains(&m)
    }

    /// Month-reset flags (σ_NC, σ_OP). Both coincide because the NC and OP
    /// billing months are the same calendar month.
    pub fn sigma(&self, t: usize) -> Result<(bool, bool)> {
        self.check(t, true)?;
        let s = self.is_month_start(t);
        Ok((s, s))
    }

    /// Unchecked month-start test; valid for `t <= n_steps`.
    pub fn is_month_start(&self, t: usize) -> bool {
        t == 0 || (self.is_midnight(t) && self.month(t) != self.month(t - 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HorizonMode {
    Shrinking,
    Rolling,
}

impl std::fmt::Display for HorizonMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            HorizonMode::Shrinking => f.write_str("shrinking"),
            HorizonMode::Rolling => f.write_str("rolling"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct HorizonSpec {
    pub mode: HorizonMode,
    pub nominal_steps: usize,
}

impl HorizonSpec {
    pub fn new(grid: &TimeGrid, mode: HorizonMode, nominal_steps: usize) -> Result<Self> {
        let spd = grid.steps_per_day();
        if nominal_steps == 0 || !nominal_steps.is_multiple_of(spd) {
            return Err(Error::Grid(format!(
                "horizon of {nominal_steps} steps is not a whole number of days ({spd} steps/day)"
            )));
        }
        Ok(Self { mode, nominal_steps })
    }

    pub fn from_hours(grid: &TimeGrid, mode: HorizonMode, hours: u32) -> Result<Self> {
        let minutes = hours * 60;
        if !minutes.is_multiple_of(MINUTES_PER_DAY) || hours == 0 {
            return Err(Error::Grid(format!(
                "horizon of {hours} h is not a whole number of days"
            )));
        }
        Self::new(grid, mode, (minutes / grid.step_minutes()) as usize)
    }

    pub fn nominal_days(&self, grid: &TimeGrid) -> usize {
        self.nominal_steps / grid.steps_per_day()
    }
}

/// An inclusive step window `[start, end]` with the step at which the 50 %
/// SOC low threshold applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HorizonWindow {
    pub start: usize,
    pub end: usize,
    pub threshold_step: usize,
}

impl HorizonWindow {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, k: usize) -> bool {
        (self.start..=self.end).contains(&k)
    }

    pub fn steps(&self) -> std::ops::RangeInclusive<usize> {
        self.start..=self.end
    }
}

/// Window of the horizon starting at `t`. Used for both the prediction and the
/// reference horizon.
pub fn window(grid: &TimeGrid, spec: &HorizonSpec, t: usize) -> Result<HorizonWindow> {
    grid.check(t, false)?;
    let last = grid.n_steps() - 1;
    match spec.mode {
        HorizonMode::Shrinking => {
            let end = grid.day_end(grid.day(t) + spec.nominal_days(grid) - 1).min(last);
            Ok(HorizonWindow {
                start: t,
                end,
                threshold_step: end + 1,
            })
        }
        HorizonMode::Rolling => {
            let end = (t + spec.nominal_steps - 1).min(last);
            let spd = grid.steps_per_day();
            // last midnight in (t, end + 1]
            let threshold_step = ((end + 1) / spd) * spd;
            let threshold_step = if threshold_step > t { threshold_step } else { end + 1 };
            Ok(HorizonWindow {
                start: t,
                end,
                threshold_step,
            })
        }
    }
}

pub fn mpc_window(grid: &TimeGrid, spec: &HorizonSpec, t: usize) -> Result<HorizonWindow> {
    window(grid, spec, t)
}

pub fn ref_window(grid: &TimeGrid, spec: &HorizonSpec, t: usize) -> Result<HorizonWindow> {
    window(grid, spec, t)
}

/// Remainder of the billing month containing `t`, with the threshold one past
/// its end.
pub fn full_month_window(grid: &TimeGrid, t: usize) -> Result<HorizonWindow> {
    grid.check(t, false)?;
    let end = grid.month_end(t);
    Ok(HorizonWindow {
        start: t,
        end,
        threshold_step: end + 1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn date(y: i32, m: u32, d: u32) -> NaiveDate {
        NaiveDate::from_ymd_opt(y, m, d).unwrap()
    }

    fn year() -> TimeGrid {
        TimeGrid::new(date(2019, 1, 1), 365, 15).unwrap()
    }

    #[test]
    fn build_grid_examples() {
        let g = year();
        assert_eq!(g.n_steps(), 35040);
        assert_eq!(g.n_months(), 12);

        let g = TimeGrid::new(date(2019, 1, 1), 1, 15).unwrap();
        assert_eq!((g.n_steps(), g.n_months()), (96, 1));

        let g = TimeGrid::new(date(2019, 2, 1), 28, 60).unwrap();
        assert_eq!(g.n_steps(), 672);
        assert!((0..672).all(|t| g.month(t) == 0));
        assert_eq!(g.n_months(), 1);
        // step one past the end begins March
        assert!(g.is_month_start(672));
    }

    #[test]
    fn build_grid_rejects_bad_input() {
        assert!(TimeGrid::new(date(2019, 1, 1), 1, 7).is_err());
        assert!(TimeGrid::new(date(2019, 1, 1), 1, 0).is_err());
        assert!(TimeGrid::new(date(2019, 1, 1), 0, 15).is_err());
    }

    #[test]
    fn op_period_is_half_open() {
        let g = year();
        let at = |h: usize, m: usize| (h * 60 + m) / 15;
        assert!(g.is_op_period(at(16, 0)).unwrap());
        assert!(g.is_op_period(at(20, 45)).unwrap());
        assert!(!g.is_op_period(at(21, 0)).unwrap());
        assert!(!g.is_op_period(at(3, 15)).unwrap());
        assert!(g.is_op_period(g.n_steps()).is_err());
        for d in [0, 100, 364] {
            let n = (d * 96..(d + 1) * 96).filter(|&t| g.in_op(t)).count();
            assert_eq!(n, 20);
        }
    }

    #[test]
    fn sigma_marks_month_starts() {
        let g = year();
        assert_eq!(g.sigma(0).unwrap(), (true, true));
        assert_eq!(g.sigma(31 * 96).unwrap(), (true, true));
        assert_eq!(g.sigma(17).unwrap(), (false, false));
        assert_eq!(g.sigma(31 * 96 - 1).unwrap(), (false, false));
        // one past the end of a full year is the next January
        assert_eq!(g.sigma(g.n_steps()).unwrap(), (true, true));
        assert!(g.sigma(g.n_steps() + 1).is_err());
        let ones = (0..g.n_steps()).filter(|&t| g.sigma(t).unwrap().0).count();
        assert_eq!(ones, g.n_months());
    }

    #[test]
    fn month_ranges_cover_grid() {
        let g = year();
        let total: usize = (0..g.n_months()).map(|m| g.month_range(m).len()).sum();
        assert_eq!(total, g.n_steps());
        assert_eq!(g.month_range(1), 31 * 96..59 * 96);
        assert_eq!(g.month_end(31 * 96 + 5), 59 * 96 - 1);
        assert!(!g.month_is_partial(0));
        let short = TimeGrid::new(date(2019, 1, 1), 1, 15).unwrap();
        assert!(short.month_is_partial(0));
    }

    #[test]
    fn shrinking_window_examples() {
        let g = year();
        let s24 = HorizonSpec::new(&g, HorizonMode::Shrinking, 96).unwrap();
        let w = mpc_window(&g, &s24, 10).unwrap();
        assert_eq!((w.start, w.end, w.threshold_step), (10, 95, 96));
        let s48 = HorizonSpec::new(&g, HorizonMode::Shrinking, 192).unwrap();
        let w = mpc_window(&g, &s48, 10).unwrap();
        assert_eq!((w.start, w.end, w.threshold_step), (10, 191, 192));
        let w = ref_window(&g, &s24, 0).unwrap();
        assert_eq!((w.start, w.end, w.threshold_step), (0, 95, 96));
        // last step of a day keeps a one-step window
        let w = mpc_window(&g, &s24, 95).unwrap();
        assert_eq!((w.start, w.end), (95, 95));
    }

    #[test]
    fn rolling_window_examples() {
        let g = year();
        let r48 = HorizonSpec::new(&g, HorizonMode::Rolling, 192).unwrap();
        let w = mpc_window(&g, &r48, 10).unwrap();
        assert_eq!((w.start, w.end, w.threshold_step), (10, 201, 192));
        let r24 = HorizonSpec::new(&g, HorizonMode::Rolling, 96).unwrap();
        let w = ref_window(&g, &r24, 50).unwrap();
        assert_eq!((w.start, w.end, w.threshold_step), (50, 145, 96));
        // a window starting at midnight places the threshold a full day ahead
        let w = ref_window(&g, &r24, 96).unwrap();
        assert_eq!((w.end, w.threshold_step), (191, 192));
        // clipped at the simulation end
        let n = g.n_steps();
        let w = mpc_window(&g, &r48, n - 10).unwrap();
        assert_eq!((w.end, w.threshold_step), (n - 1, n));
    }

    #[test]
    fn full_month_window_example() {
        let g = year();
        let march = 59 * 96;
        let w = full_month_window(&g, march).unwrap();
        assert_eq!((w.start, w.end, w.threshold_step), (march, 90 * 96 - 1, 90 * 96));
    }

    #[test]
    fn horizon_spec_must_be_whole_days() {
        let g = year();
        assert!(HorizonSpec::new(&g, HorizonMode::Rolling, 100).is_err());
        assert!(HorizonSpec::from_hours(&g, HorizonMode::Rolling, 36).is_err());
        assert_eq!(
            HorizonSpec::from_hours(&g, HorizonMode::Rolling, 48)
                .unwrap()
                .nominal_steps,
            192
        );
    }

    #[test]
    fn window_progressions() {
        let g = TimeGrid::new(date(2019, 1, 28), 10, 60).unwrap();
        let s = HorizonSpec::new(&g, HorizonMode::Shrinking, 48).unwrap();
        let r = HorizonSpec::new(&g, HorizonMode::Rolling, 48).unwrap();
        for t in 0..g.n_steps() - 1 {
            let (a, b) = (window(&g, &s, t).unwrap(), window(&g, &s, t + 1).unwrap());
            assert_eq!(a.start, t);
            assert!(a.end >= t);
            if g.day(t) == g.day(t + 1) {
                assert_eq!(a.end, b.end);
            } else {
                assert!(b.end == a.end + 24 || b.end == g.n_steps() - 1);
            }
            let (a, b) = (window(&g, &r, t).unwrap(), window(&g, &r, t + 1).unwrap());
            assert!(b.end - a.end <= 1);
            assert!(a.start < a.threshold_step && a.threshold_step <= a.end + 1);
            assert!(g.is_midnight(a.threshold_step));
        }
    }
}
