use std::collections::BTreeSet;

use contract_zoom::analysis::{exact_width, random_fosd_market, MeanSe};
use contract_zoom::baselines::{nonadaptive_run, BanditPolicy};
use contract_zoom::curve::{Monotonicity, PiecewiseLinear};
use contract_zoom::envs::{
    make_high_low_market, make_homogeneous_market, make_inventory_env, make_staircase_instance, make_taskpricing,
    make_two_type_market, make_uniform_market, Market, ThetaLaw,
};
use contract_zoom::mesh::{Anchors, CandidateSet, Cell};
use contract_zoom::model::Contract;
use contract_zoom::zooming::{self, RunOptions, ZoomConfig, Zooming};
use contract_zoom::Environment;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn families() -> Vec<(&'static str, Market<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    vec![
        ("uniform", make_uniform_market()),
        ("homogeneous", make_homogeneous_market(0.3).unwrap()),
        ("two_type", make_two_type_market(0.2, 0.9).unwrap()),
        (
            "random_theta",
            make_high_low_market(PiecewiseLinear::identity(), ThetaLaw::Uniform { lo: 0.5, hi: 1.0 }, 0.0, 1.0).unwrap(),
        ),
        ("taskpricing", make_taskpricing(PiecewiseLinear::identity(), 1.0).unwrap()),
        ("staircase", make_staircase_instance(0.01).unwrap().0),
        (
            "inventory",
            make_inventory_env(
                PiecewiseLinear::monotone(vec![0.0, 1.0], vec![1.0, 0.0], Monotonicity::NonIncreasing).unwrap(),
            )
            .unwrap(),
        ),
        ("fosd_m3", random_fosd_market(3, 4, 5, &mut rng).unwrap()),
    ]
}

fn random_contract<R: Rng>(m: usize, rng: &mut R) -> Contract<f64> {
    loop {
        let x: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        if x.iter().sum::<f64>() <= 1.0 {
            return Contract::new(x).unwrap();
        }
    }
}

#[test]
fn sampler_agrees_with_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 100_000;
    for (name, market) in families() {
        for _ in 0..3 {
            let x = random_contract(market.dim(), &mut rng);
            let exact = market.exact_utility(&x).unwrap();
            let draws: Vec<f64> = (0..n).map(|_| market.observe(&x, &mut rng).utility).collect();
            let s = MeanSe::of(&draws);
            let tol = 4.0 * s.se.max(1e-12);
            assert!((s.mean - exact).abs() <= tol, "{name} at {:?}: mc {} ± {} vs exact {exact}", x.increments(), s.mean, s.se);
        }
    }
}

#[test]
fn seeded_rounds_repeat() {
    for (name, market) in families() {
        let x = random_contract(market.dim(), &mut ChaCha8Rng::seed_from_u64(1));
        let mut a = ChaCha8Rng::seed_from_u64(99);
        let mut b = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..500 {
            let (ra, rb) = (market.play_round(&x, &mut a), market.play_round(&x, &mut b));
            assert_eq!(ra.observation(), rb.observation(), "{name}");
            assert_eq!(ra.hidden(), rb.hidden(), "{name}");
        }
    }
}

#[test]
fn sale_frequency_falls_with_price() {
    let demand = PiecewiseLinear::monotone(vec![0.0, 0.3, 1.0], vec![1.0, 0.8, 0.0], Monotonicity::NonIncreasing).unwrap();
    let market = make_inventory_env(demand).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let n = 20_000;
    let freqs: Vec<(f64, f64)> = (0..=10)
        .map(|i| {
            let x = Contract::new(vec![i as f64 / 10.0]).unwrap();
            let sales = (0..n).filter(|_| market.observe(&x, &mut rng).outcome == 1).count();
            let f = sales as f64 / n as f64;
            (f, (f * (1.0 - f) / n as f64).sqrt())
        })
        .collect();
    for w in freqs.windows(2) {
        let se = (w[0].1.powi(2) + w[1].1.powi(2)).sqrt();
        assert!(w[1].0 <= w[0].0 + 4.0 * se + 1e-12, "{w:?}");
    }
}

/// Expected realised utility of a cell given how often each anchor was posted.
fn conditional_mean(market: &Market<f64>, anchors: &Anchors<f64>, n_plus: u64, n_minus: u64, n: u64) -> f64 {
    match anchors {
        Anchors::Atomic(c) => market.exact_utility(c).unwrap(),
        Anchors::Composite { lower, upper } => {
            let (u_lo, u_hi) = (market.exact_utility(lower).unwrap(), market.exact_utility(upper).unwrap());
            (n_plus as f64 * u_hi + n_minus as f64 * u_lo) / n as f64
        }
    }
}

#[test]
fn clean_execution_is_frequent() {
    let market = make_uniform_market::<f64>();
    let set = CandidateSet::uniform_mesh(2, 0.08).unwrap();
    let horizon = 2000;
    let cfg = ZoomConfig::theoretical(16.0, horizon);
    let (mut pairs, mut dirty) = (0u64, 0u64);
    for seed in 0..20 {
        let mut state = Zooming::new(set.clone(), cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..horizon {
            state.step(&market, &mut rng).unwrap();
            for a in state.active().iter().filter(|a| a.stats.n > 0) {
                let st = &a.stats;
                let truth = conditional_mean(&market, &a.anchors, st.plus.n, st.minus.n, st.n);
                let rad = zooming::confidence_radius(st.n, &cfg, zooming::RadiusUse::Select);
                pairs += 1;
                dirty += u64::from((st.mean_utility().unwrap() - truth).abs() > rad);
            }
        }
    }
    let frac = dirty as f64 / pairs as f64;
    assert!(frac < 0.05, "{dirty} of {pairs} pairs outside the radius");
}

#[test]
fn activated_cells_satisfy_width_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let markets = [make_uniform_market(), random_fosd_market(2, 4, 3, &mut rng).unwrap()];
    for (i, market) in markets.iter().enumerate() {
        let set = CandidateSet::full_space(2);
        let cfg = ZoomConfig::simulation();
        let (_, state) = zooming::run(market, &set, &cfg, 3000, i as u64, RunOptions::default()).unwrap();
        let mut seen: BTreeSet<Cell> = state.active().iter().map(|a| a.cell.clone()).collect();
        for (_, parent) in state.zoom_events() {
            seen.insert(parent.clone());
        }
        assert!(state.zoom_events().len() > 2, "market {i} never zoomed");
        for cell in seen {
            if cell.depth() > 6 {
                continue;
            }
            let (lo, hi) = (Contract::new(cell.lower()).unwrap(), Contract::new(cell.upper()).unwrap());
            let (bl, bh) = (market.exact_breakdown(&lo).unwrap(), market.exact_breakdown(&hi).unwrap());
            let vw = (bh.value - bl.payment) - (bl.value - bh.payment);
            let w = exact_width(market, &cell, 16).unwrap();
            assert!(w <= vw + 1e-9, "market {i}, cell {cell}: width {w} > vw {vw}");
        }
    }
}

#[test]
fn invariants_hold_on_a_short_run() {
    let market = make_two_type_market(0.2, 0.7).unwrap();
    let set = CandidateSet::uniform_mesh(2, 0.05).unwrap();
    let cfg = ZoomConfig::simulation().with_invariant_checks(true);
    for seed in 0..3 {
        zooming::run(&market, &set, &cfg, 3000, seed, RunOptions::default()).unwrap();
    }
}

#[test]
fn arm_order_does_not_change_expected_utility() {
    let market = make_uniform_market::<f64>();
    let set = CandidateSet::uniform_mesh(2, 0.1).unwrap();
    let family = |base: u64| -> MeanSe {
        let avgs: Vec<f64> = (0..60)
            .map(|k| {
                let rec = nonadaptive_run(&market, &set, BanditPolicy::Ucb1Constant(1.0), 2000, base + k, RunOptions::default()).unwrap();
                rec.average_utility(2000)
            })
            .collect();
        MeanSe::of(&avgs)
    };
    let (a, b) = (family(0), family(10_000));
    let se = (a.se.powi(2) + b.se.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() <= 3.0 * se, "{a:?} vs {b:?}");
}

#[test]
fn anchor_coin_balance_is_reported() {
    let market = make_uniform_market::<f64>();
    let set = CandidateSet::uniform_mesh(2, 0.08).unwrap();
    let (_, state) = zooming::run(&market, &set, &ZoomConfig::simulation(), 5000, 3, RunOptions::default()).unwrap();
    let mut flagged = 0;
    for a in state.active() {
        let (p, m) = (a.stats.plus.n as f64, a.stats.minus.n as f64);
        let n = p + m;
        if n > 0.0 && (p - m).abs() > 5.0 * n.sqrt() {
            flagged += 1;
            eprintln!("coin imbalance flagged in {}: {p} vs {m}", a.cell);
        }
    }
    eprintln!("anchor coin: {flagged} of {} active cells flagged", state.active().len());
}

#[test]
fn zooming_beats_the_null_contract() {
    let market = make_uniform_market::<f64>();
    let set = CandidateSet::uniform_mesh(2, 0.08).unwrap();
    let null = market.exact_utility(&Contract::zero(2)).unwrap();
    assert!((null - 0.3).abs() < 1e-12);
    let avgs: Vec<f64> = (0..50)
        .map(|seed| {
            let (rec, _) = zooming::run(&market, &set, &ZoomConfig::simulation(), 5000, seed, RunOptions::default()).unwrap();
            rec.average_utility(5000)
        })
        .collect();
    let s = MeanSe::of(&avgs);
    assert!(s.mean.is_finite() && s.mean > null, "{s:?}");
}
