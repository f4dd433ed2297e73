use kronruin_core::montecarlo::{coupled_path, coupling_kernel};
use kronruin_core::siegmund::win_prob_product;
use kronruin_core::{
    absorb_dist, build_dual, build_game, preset_r_of_d, simulate, simulate_coupled, BirthDeathSpec, GameSpec,
    HorizonOpts, SimConfig,
};
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn lazy_game() -> GameSpec {
    let a = BirthDeathSpec::new(3, vec![0.15, 0.1], vec![0.05, 0.05]).unwrap();
    let b = BirthDeathSpec::new(4, vec![0.1, 0.1, 0.15], vec![0.02, 0.05, 0.05]).unwrap();
    preset_r_of_d(vec![a, b], 1).unwrap()
}

fn cfg(runs: usize, seed: u64, workers: usize) -> SimConfig {
    SimConfig {
        runs,
        seed,
        max_steps: 1_000_000,
        workers,
    }
}

/// Pearson statistic of observed counts against expected probabilities,
/// pooling cells with expected count below 5 into their neighbour.
fn chi_square(counts: &[f64], probs: &[f64], total: f64) -> (f64, usize) {
    let mut obs = Vec::new();
    let mut exp = Vec::new();
    let (mut o, mut e) = (0.0, 0.0);
    for t in 0..probs.len().max(counts.len()) {
        o += counts.get(t).copied().unwrap_or(0.0);
        e += probs.get(t).copied().unwrap_or(0.0) * total;
        if e >= 5.0 {
            obs.push(o);
            exp.push(e);
            (o, e) = (0.0, 0.0);
        }
    }
    if let (Some(lo), Some(le)) = (obs.last_mut(), exp.last_mut()) {
        *lo += o;
        *le += e;
    }
    let stat = obs.iter().zip(&exp).map(|(o, e)| (o - e) * (o - e) / e).sum();
    (stat, obs.len() - 1)
}

#[test]
fn reports_are_identical_across_worker_counts() {
    let game = lazy_game();
    let chain = build_game(&game).unwrap();
    let one = simulate(&chain, &[2, 2], &cfg(4000, 17, 1)).unwrap();
    let many = simulate(&chain, &[2, 2], &cfg(4000, 17, 7)).unwrap();
    assert_eq!(one, many);
    let again = simulate(&chain, &[2, 2], &cfg(4000, 17, 1)).unwrap();
    assert_eq!(one, again);
    let other = simulate(&chain, &[2, 2], &cfg(4000, 18, 1)).unwrap();
    assert_ne!(one, other);

    let origin = game.space().delta(&[1, 1]).unwrap();
    let c1 = simulate_coupled(&game, &origin, &cfg(2000, 3, 1)).unwrap();
    let c4 = simulate_coupled(&game, &origin, &cfg(2000, 3, 4)).unwrap();
    assert_eq!(c1, c4);
}

#[test]
fn win_frequency_within_four_standard_errors() {
    let walk = BirthDeathSpec::constant(3, 0.3, 0.1).unwrap();
    let game = preset_r_of_d(vec![walk.clone(), walk], 1).unwrap();
    let chain = build_game(&game).unwrap();
    let report = simulate(&chain, &[2, 2], &cfg(20_000, 5, 4)).unwrap();
    let exact = (12.0f64 / 13.0).powi(2);
    assert!((win_prob_product(&game)[game.space().index(&[2, 2]).unwrap()] - exact).abs() < 1e-12);
    assert!((report.win_freq - exact).abs() < 4.0 * report.win_freq_se);
    assert_eq!(report.wins + report.losses + report.unfinished, 20_000);
    assert!(report.horizon_warning.is_none());
}

#[test]
fn coupled_dual_is_pure_birth_and_hits_top_with_primal() {
    let game = lazy_game();
    let dual = build_dual(&game).unwrap();
    let space = game.space();
    let top = space.cells() - 1;
    let origin = space.delta(&[1, 1]).unwrap();
    let c = cfg(1, 23, 1);
    for run in 0..300 {
        let path = coupled_path(&game, &origin, &c, run).unwrap();
        // a losing path ends with the primal in the sink and no dual step
        match path.primal.last() {
            Some(None) => assert_eq!(path.primal.len(), path.dual.len() + 1),
            _ => assert_eq!(path.primal.len(), path.dual.len()),
        }
        for w in path.dual.windows(2) {
            let (a, b) = (space.cell(w[0]), space.cell(w[1]));
            assert!(a.iter().zip(&b).all(|(x, y)| x <= y), "run {run}: {a:?} -> {b:?}");
        }
        for (x, y) in path.primal.iter().zip(&path.dual) {
            assert_eq!(*x == Some(top), *y == top, "run {run}");
        }
        // each step of the dual has positive probability under the kernel
        for k in 1..path.dual.len() {
            if let Some(to) = path.primal[k] {
                let kernel = coupling_kernel(&dual, path.dual[k - 1], to).unwrap();
                let total: f64 = kernel.iter().map(|(_, w)| w).sum();
                assert!((total - 1.0).abs() < 1e-12);
                assert!(kernel.iter().any(|(s, w)| *s == path.dual[k] && *w > 0.0));
            }
        }
    }
}

#[test]
fn coupled_report_has_no_violations() {
    let game = lazy_game();
    let origin = game.space().delta(&[1, 1]).unwrap();
    let report = simulate_coupled(&game, &origin, &cfg(5000, 8, 4)).unwrap();
    assert!(report.coupled);
    assert_eq!(report.coupling_violations, 0);
    assert_eq!(report.pure_birth_violations, 0);
    // on winning paths the dual reaches the top at the same step
    assert_eq!(report.dual_time_pmf, report.win_time_pmf);
}

#[test]
fn signed_dual_start_is_refused() {
    let game = lazy_game();
    let start = game.space().delta(&[2, 2]).unwrap();
    assert!(matches!(
        simulate_coupled(&game, &start, &cfg(10, 0, 1)),
        Err(kronruin_core::Error::CouplingUnavailable(_))
    ));
}

#[test]
fn win_time_law_passes_chi_square() {
    let cases: [(GameSpec, Vec<usize>); 2] = [
        (lazy_game(), vec![2, 2]),
        (preset_r_of_d(vec![BirthDeathSpec::constant(5, 0.3, 0.2).unwrap()], 1).unwrap(), vec![3]),
    ];
    for (game, start) in cases {
        let chain = build_game(&game).unwrap();
        let report = simulate(&chain, &start, &cfg(20_000, 99, 4)).unwrap();
        let nu = chain.lift(&game.space().delta(&start).unwrap());
        let exact = absorb_dist(chain.matrix(), &nu, chain.win_index(), HorizonOpts::default()).unwrap();
        let wins = report.wins as f64;
        let counts: Vec<f64> = report.win_time_pmf.iter().map(|p| (p * wins).round()).collect();
        let (stat, df) = chi_square(&counts, &exact.conditioned(), wins);
        let critical = ChiSquared::new(df as f64).unwrap().inverse_cdf(0.999);
        assert!(stat < critical, "statistic {stat} with {df} degrees of freedom (critical {critical})");
    }
}

#[test]
fn chi_square_rejects_wrong_law() {
    let game = lazy_game();
    let chain = build_game(&game).unwrap();
    let report = simulate(&chain, &[2, 2], &cfg(20_000, 99, 4)).unwrap();
    let nu = chain.lift(&game.space().delta(&[1, 1]).unwrap());
    let other = absorb_dist(chain.matrix(), &nu, chain.win_index(), HorizonOpts::default()).unwrap();
    let wins = report.wins as f64;
    let counts: Vec<f64> = report.win_time_pmf.iter().map(|p| (p * wins).round()).collect();
    let (stat, df) = chi_square(&counts, &other.conditioned(), wins);
    assert!(stat > ChiSquared::new(df as f64).unwrap().inverse_cdf(0.999));
}
