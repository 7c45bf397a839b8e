use chrono::NaiveDate;
use proptest::prelude::*;

use empc::controllers::{
    build_reference, mpc_stage_objective, proposed_empc_plan, reference_peaks, trad_empc_plan, Controller,
    ControllerSpec, DispatchPlan, ForecastSlice, PeakLowering, Plant, Tracking,
};
use empc::io::{read_timeseries, write_timeseries_to};
use empc::sim::{run_closed_loop, ScenarioConfig};
use empc::synth::{generate, SynthParams};
use empc::tariff::{update_peak_state, BessParams, PeakState, TariffSchedule};
use empc::timegrid::{window, HorizonMode, HorizonSpec, TimeGrid};

const FEAS: f64 = 1e-6;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn grid_strategy() -> impl Strategy<Value = TimeGrid> {
    (0i64..1100, 1usize..70, prop::sample::select(vec![15u32, 30, 60])).prop_map(|(offset, days, step)| {
        let start = NaiveDate::from_ymd_opt(2019, 1, 1).unwrap() + chrono::Duration::days(offset);
        TimeGrid::new(start, days, step).unwrap()
    })
}

fn mode_strategy() -> impl Strategy<Value = HorizonMode> {
    prop_oneof![Just(HorizonMode::Shrinking), Just(HorizonMode::Rolling)]
}

/// Six hourly days straddling the January/February boundary.
fn plan_grid() -> TimeGrid {
    TimeGrid::new(NaiveDate::from_ymd_opt(2019, 1, 29).unwrap(), 6, 60).unwrap()
}

fn check_plan(plan: &DispatchPlan, load: &[f64], pv: &[f64], bess: &BessParams) -> Result<(), TestCaseError> {
    for (i, k) in plan.window.steps().enumerate() {
        let balance = load[k] - pv[k] - plan.u2[i];
        prop_assert!(
            (plan.u1[i] - balance).abs() <= FEAS,
            "step {k}: u1 {} vs {balance}",
            plan.u1[i]
        );
        prop_assert!(plan.u2[i].abs() <= bess.power_kw + FEAS);
    }
    for &x in &plan.soc {
        prop_assert!(x >= bess.soc_min - FEAS && x <= bess.soc_max + FEAS, "soc {x}");
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_progressions(grid in grid_strategy(), mode in mode_strategy(), days in 1usize..=2) {
        let spec = HorizonSpec::new(&grid, mode, days * grid.steps_per_day()).unwrap();
        let n = grid.n_steps();
        let spd = grid.steps_per_day();
        let mut prev = None;
        for t in 0..n {
            let w = window(&grid, &spec, t).unwrap();
            prop_assert_eq!(w.start, t);
            prop_assert!(t <= w.end && w.end < n);
            match mode {
                HorizonMode::Shrinking => prop_assert_eq!(w.threshold_step, w.end + 1),
                HorizonMode::Rolling => {
                    prop_assert!(t < w.threshold_step && w.threshold_step <= w.end + 1);
                    prop_assert!(grid.is_midnight(w.threshold_step) || w.threshold_step == w.end + 1);
                }
            }
            if let Some(p) = prev {
                let step = w.end - p;
                match mode {
                    HorizonMode::Shrinking if grid.is_midnight(t) => {
                        prop_assert!(step == spd || w.end == n - 1, "t {t}: end advanced by {step}");
                    }
                    HorizonMode::Shrinking => prop_assert_eq!(step, 0),
                    HorizonMode::Rolling => {
                        prop_assert!(step == 1 || (step == 0 && w.end == n - 1));
                    }
                }
            }
            prev = Some(w.end);
        }
    }

    #[test]
    fn calendar_counts(grid in grid_strategy()) {
        let n = grid.n_steps();
        let resets = (0..n).filter(|&t| grid.sigma(t).unwrap().0).count();
        prop_assert_eq!(resets, grid.n_months());
        let op_per_day = 5 * 60 / grid.step_minutes() as usize;
        for d in 0..grid.n_days() {
            let day = d * grid.steps_per_day()..(d + 1) * grid.steps_per_day();
            prop_assert_eq!(day.filter(|&t| grid.is_op_period(t).unwrap()).count(), op_per_day);
        }
    }

    #[test]
    fn series_round_trip(
        days in 1usize..4,
        values in prop::collection::vec((0.0f64..5000.0, 0.0f64..2000.0), 96 * 4),
    ) {
        let grid = TimeGrid::new(NaiveDate::from_ymd_opt(2020, 2, 28).unwrap(), days, 15).unwrap();
        let n = grid.n_steps();
        let load: Vec<f64> = values[..n].iter().map(|v| v.0).collect();
        let pv: Vec<f64> = values[..n].iter().map(|v| v.1).collect();
        let mut buf = Vec::new();
        write_timeseries_to(&mut buf, &grid, &load, &pv).unwrap();
        let back = read_timeseries(buf.as_slice(), &grid).unwrap();
        prop_assert_eq!(back.load_kw, load);
        prop_assert_eq!(back.pv_kw, pv);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn trad_plans_balance_and_respect_bounds(
        seed in 0u64..1000,
        t in 0usize..144,
        x in 0.2f64..=0.8,
        p_nc in 0.0f64..1500.0,
        p_op in 0.0f64..1500.0,
        days in 1usize..=2,
        mode in mode_strategy(),
        tracking in prop_oneof![Just(Tracking::Nt), Just(Tracking::Wt)],
    ) {
        let grid = plan_grid();
        let (load, pv) = generate(&grid, seed, &SynthParams::default());
        let tariff = TariffSchedule::case_study();
        let bess = BessParams::case_study();
        let plant = Plant::new(&grid, &tariff, &bess);
        let spec = HorizonSpec::new(&grid, mode, days * grid.steps_per_day()).unwrap();
        let w = window(&grid, &spec, t).unwrap();
        let forecast = ForecastSlice::from_series(w, &load, &pv);
        let plan = trad_empc_plan(&plant, x, &forecast, PeakState::new(p_nc, p_op), tracking).unwrap();
        check_plan(&plan, &load, &pv, &bess)?;
    }

    #[test]
    fn proposed_plans_are_pinned_and_tight(
        seed in 0u64..1000,
        t in 0usize..144,
        x in 0.2f64..=0.8,
        p_nc in 0.0f64..1500.0,
        p_op in 0.0f64..1500.0,
        pair in prop::sample::select(vec![(1usize, 1usize), (1, 2), (2, 2)]),
        mode in mode_strategy(),
        tracking in prop_oneof![Just(Tracking::Nt), Just(Tracking::Wt)],
        lowering in prop_oneof![Just(PeakLowering::Segment), Just(PeakLowering::PerStep)],
    ) {
        let grid = plan_grid();
        let spd = grid.steps_per_day();
        let (load, pv) = generate(&grid, seed, &SynthParams::default());
        let tariff = TariffSchedule::case_study();
        let bess = BessParams::case_study();
        let plant = Plant::new(&grid, &tariff, &bess);
        let mut spec = ControllerSpec::proposed(
            tracking,
            HorizonSpec::new(&grid, mode, pair.0 * spd).unwrap(),
            HorizonSpec::new(&grid, mode, pair.1 * spd).unwrap(),
        );
        spec.lowering = lowering;
        let controller = Controller::new(spec, plant, &load, &pv).unwrap();
        let (w, rw) = controller.windows(t).unwrap();
        let rw = rw.unwrap();
        let peaks = PeakState::new(p_nc, p_op);
        let reference = build_reference(&plant, x, &ForecastSlice::from_series(rw, &load, &pv), peaks, tracking).unwrap();
        let plan = proposed_empc_plan(
            &plant, x, peaks, &reference, &ForecastSlice::from_series(w, &load, &pv), lowering,
        ).unwrap();
        check_plan(&plan, &load, &pv, &bess)?;
        let gap = (plan.soc[w.len()] - reference.soc_at(w.end + 1)).abs();
        prop_assert!(gap <= FEAS, "terminal gap {gap}");
        let rp = reference_peaks(&grid, w.end + 1, &reference, peaks).unwrap();
        let replayed = mpc_stage_objective(&plant, &plan, peaks, &rp);
        prop_assert!(rel(plan.objective, replayed) <= 1e-7, "lp {} vs replay {replayed}", plan.objective);
    }

    #[test]
    fn tracking_modes_coincide_at_month_start(
        seed in 0u64..1000,
        t in prop::sample::select(vec![0usize, 72]),
        x in 0.2f64..=0.8,
        days in 1usize..=2,
        mode in mode_strategy(),
    ) {
        let grid = plan_grid();
        prop_assert!(grid.is_month_start(t));
        let (load, pv) = generate(&grid, seed, &SynthParams::default());
        let tariff = TariffSchedule::case_study();
        let bess = BessParams::case_study();
        let plant = Plant::new(&grid, &tariff, &bess);
        let spec = HorizonSpec::new(&grid, mode, days * grid.steps_per_day()).unwrap();
        let forecast = ForecastSlice::from_series(window(&grid, &spec, t).unwrap(), &load, &pv);
        let zero = PeakState::default();
        let nt = trad_empc_plan(&plant, x, &forecast, zero, Tracking::Nt).unwrap();
        let wt = trad_empc_plan(&plant, x, &forecast, zero, Tracking::Wt).unwrap();
        prop_assert!(rel(nt.objective, wt.objective) <= 1e-7, "{} vs {}", nt.objective, wt.objective);
        let rn = build_reference(&plant, x, &forecast, zero, Tracking::Nt).unwrap();
        let rw = build_reference(&plant, x, &forecast, zero, Tracking::Wt).unwrap();
        prop_assert!(rel(rn.objective, rw.objective) <= 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn closed_loop_trace_invariants(seed in 0u64..10_000, case in 0usize..20, p_nc in 0.0f64..600.0) {
        let grid = TimeGrid::new(NaiveDate::from_ymd_opt(2019, 4, 29).unwrap(), 4, 60).unwrap();
        let (load, pv) = generate(&grid, seed, &SynthParams::default());
        let spec = ControllerSpec::full_matrix(grid.steps_per_day())[case];
        let mut sc = ScenarioConfig::new(grid.clone(), TariffSchedule::case_study(), BessParams::case_study(), spec);
        sc.initial_peaks = PeakState::new(p_nc, 0.0);
        let out = run_closed_loop(&sc, &load, &pv).unwrap();
        let bess = sc.bess;

        let mut state = sc.initial_peaks;
        for r in &out.trace {
            prop_assert!(r.x >= bess.soc_min - FEAS && r.x <= bess.soc_max + FEAS);
            prop_assert!(r.x_next >= bess.soc_min - FEAS && r.x_next <= bess.soc_max + FEAS);
            let next = update_peak_state(state, r.u1, &grid, r.t).unwrap();
            prop_assert_eq!(next, r.peaks_after);
            if r.t + 1 < grid.n_steps() && !grid.is_month_start(r.t + 1) {
                prop_assert!(next.p_nc >= state.p_nc && next.p_op >= state.p_op);
            }
            state = next;
        }

        for (i, m) in out.report.months.iter().enumerate() {
            let steps = grid.month_range(m.month);
            let floor = if i == 0 { sc.initial_peaks } else { PeakState::default() };
            let nc = steps.clone().map(|t| out.trace[t].u1).fold(floor.p_nc, f64::max);
            let op = steps.filter(|&t| grid.in_op(t)).map(|t| out.trace[t].u1).fold(floor.p_op, f64::max);
            prop_assert_eq!(m.peak_nc_kw, nc);
            prop_assert_eq!(m.peak_op_kw, op);
        }
        let r = &out.report;
        prop_assert_eq!(r.annual_cost, r.ncdc + r.opdc + r.energy_cost + r.bess_loss);
    }
}
