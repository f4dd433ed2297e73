//! Simulation of game chains and of the coupled pure-birth dual.
//!
//! Run `i` draws from `ChaCha8Rng::seed_from_u64(seed)` on stream `i`, so a
//! report depends only on `(seed, runs, max_steps)` and not on how runs are
//! spread over workers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, StateLabel};
use crate::game::{AbsorbingChain, GameSpec};
use crate::intertwine::{build_dual, dual_initial, Dual};
use crate::matrix::{is_absorbing, Matrix, DEFAULT_TOL};

/// Share of unfinished runs above which a report carries a warning.
pub const HORIZON_WARNING_SHARE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimConfig {
    pub runs: usize,
    pub seed: u64,
    pub max_steps: usize,
    pub workers: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            runs: 10_000,
            seed: 0,
            max_steps: 1_000_000,
            workers: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub runs: usize,
    pub seed: u64,
    pub wins: usize,
    pub losses: usize,
    pub unfinished: usize,
    pub win_freq: f64,
    pub win_freq_se: f64,
    /// Empirical law of the absorption time given a win, indexed by `t`.
    pub win_time_pmf: Vec<f64>,
    /// Empirical law of the absorption time given a loss.
    pub lose_time_pmf: Vec<f64>,
    pub mean_win_time: Option<f64>,
    pub mean_win_time_se: Option<f64>,
    pub mean_lose_time: Option<f64>,
    pub mean_lose_time_se: Option<f64>,
    pub horizon_warning: Option<String>,
    pub coupled: bool,
    /// Paths on which the dual sat at its top exactly when the primal did
    /// not, at some step.
    pub coupling_violations: usize,
    /// Paths on which the dual decreased a coordinate.
    pub pure_birth_violations: usize,
    /// Empirical law of the dual's absorption time over winning paths.
    pub dual_time_pmf: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Outcome {
    Win(usize),
    Lose(usize),
    Unfinished,
}

#[derive(Debug, Clone, Copy, Default)]
struct CouplingFlags {
    violated: bool,
    decreased: bool,
    dual_hit: Option<usize>,
}

/// Cumulative sums over the nonzero entries of each row.
#[derive(Debug, Clone)]
struct RowSampler {
    rows: Vec<Vec<(usize, f64)>>,
}

impl RowSampler {
    fn new(p: &Matrix) -> Self {
        let rows = (0..p.rows())
            .map(|i| {
                let mut acc = 0.0;
                p.row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > 0.0)
                    .map(|(j, v)| {
                        acc += v;
                        (j, acc)
                    })
                    .collect()
            })
            .collect();
        Self { rows }
    }

    fn sample(&self, i: usize, rng: &mut ChaCha8Rng) -> usize {
        sample_cumulative(&self.rows[i], rng)
    }
}

fn sample_cumulative(cum: &[(usize, f64)], rng: &mut ChaCha8Rng) -> usize {
    let total = cum.last().map_or(0.0, |c| c.1);
    let u = rng.random::<f64>() * total;
    cum.iter().find(|c| u < c.1).or(cum.last()).map_or(0, |c| c.0)
}

fn run_rng(seed: u64, run: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(run as u64);
    rng
}

fn validate(cfg: &SimConfig) -> Result<()> {
    if cfg.runs == 0 {
        return Err(Error::InvalidGame("at least one run is required".into()));
    }
    if cfg.workers == 0 {
        return Err(Error::InvalidGame("at least one worker is required".into()));
    }
    Ok(())
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Internal(e.to_string()))
}

/// Simulates `chain` from the cell `start` (1-based coordinates).
pub fn simulate(chain: &AbsorbingChain, start: &[usize], cfg: &SimConfig) -> Result<SimReport> {
    validate(cfg)?;
    let from = chain.space().index(start)? + 1;
    if from == chain.win_index() {
        return Err(Error::StartOutOfRange(format!("{} is absorbing", StateLabel(start.to_vec()))));
    }
    let sampler = RowSampler::new(chain.matrix());
    let absorbing: Vec<bool> = (0..chain.len()).map(|i| is_absorbing(chain.matrix(), i, DEFAULT_TOL)).collect();
    let win = chain.win_index();
    let outcomes: Vec<(Outcome, CouplingFlags)> = pool(cfg.workers)?.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| {
                let mut rng = run_rng(cfg.seed, r);
                let mut x = from;
                for t in 1..=cfg.max_steps {
                    x = sampler.sample(x, &mut rng);
                    if absorbing[x] {
                        let o = if x == win { Outcome::Win(t) } else { Outcome::Lose(t) };
                        return (o, CouplingFlags::default());
                    }
                }
                (Outcome::Unfinished, CouplingFlags::default())
            })
            .collect()
    });
    Ok(summarize(cfg, &outcomes, false))
}

/// A primal path together with its coupled dual path, as 0-based cells;
/// the primal entry `None` is the sink.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPath {
    pub primal: Vec<Option<usize>>,
    pub dual: Vec<usize>,
}

struct Coupler<'a> {
    dual: &'a Dual,
    primal: RowSampler,
    hat: Vec<Vec<(usize, f64)>>,
    nu_star: Vec<(usize, f64)>,
    nu_hat: Vec<f64>,
    max_steps: usize,
}

impl<'a> Coupler<'a> {
    fn new(dual: &'a Dual, nu_star: &[f64], max_steps: usize) -> Result<Self> {
        let dist = dual_initial(&dual.link, nu_star)?;
        if !dist.is_distribution {
            return Err(Error::CouplingUnavailable(
                "the dual initial law has negative entries".into(),
            ));
        }
        if nu_star.iter().any(|v| *v < 0.0) || (nu_star.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::CouplingUnavailable("the initial law is not a distribution".into()));
        }
        let p_hat = dual.pure_birth.matrix();
        let hat = (0..p_hat.rows())
            .map(|i| {
                p_hat
                    .row(i)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v > 0.0)
                    .map(|(j, v)| (j, *v))
                    .collect()
            })
            .collect();
        let mut acc = 0.0;
        let nu_star = nu_star
            .iter()
            .enumerate()
            .filter(|(_, v)| **v > 0.0)
            .map(|(j, v)| {
                acc += v;
                (j, acc)
            })
            .collect();
        Ok(Self {
            dual,
            primal: RowSampler::new(dual.chain.matrix()),
            hat,
            nu_star,
            nu_hat: dist.values,
            max_steps,
        })
    }

    /// Draws the dual's next cell given its current cell and the primal's
    /// new cell: weights `P̂(ê', ê) Λ(ê, e*)`, normalized by `(P̂ Λ)(ê', e*)`.
    fn dual_step(&self, from_hat: usize, to_star: usize, rng: &mut ChaCha8Rng) -> Result<usize> {
        let link = self.dual.link.matrix();
        let mut acc = 0.0;
        let cum: Vec<(usize, f64)> = self.hat[from_hat]
            .iter()
            .filter_map(|&(e, p)| {
                let w = p * link[(e, to_star)];
                (w > 0.0).then(|| {
                    acc += w;
                    (e, acc)
                })
            })
            .collect();
        if acc <= 0.0 {
            return Err(Error::NumericGuard(format!(
                "zero normalizer for dual cell {from_hat} and primal cell {to_star}"
            )));
        }
        Ok(sample_cumulative(&cum, rng))
    }

    fn initial(&self, rng: &mut ChaCha8Rng) -> Result<(usize, usize)> {
        let e_star = sample_cumulative(&self.nu_star, rng);
        let link = self.dual.link.matrix();
        let mut acc = 0.0;
        let cum: Vec<(usize, f64)> = self
            .nu_hat
            .iter()
            .enumerate()
            .filter_map(|(e, v)| {
                let w = v * link[(e, e_star)];
                (w > 0.0).then(|| {
                    acc += w;
                    (e, acc)
                })
            })
            .collect();
        if acc <= 0.0 {
            return Err(Error::NumericGuard(format!("no dual start compatible with cell {e_star}")));
        }
        Ok((e_star, sample_cumulative(&cum, rng)))
    }

    fn run(&self, rng: &mut ChaCha8Rng, mut path: Option<&mut CoupledPath>) -> Result<(Outcome, CouplingFlags)> {
        let space = self.dual.pure_birth.space();
        let top = self.dual.pure_birth.win_index();
        let win = self.dual.chain.win_index();
        let (start_star, mut x_hat) = self.initial(rng)?;
        let mut x = start_star + 1;
        let mut flags = CouplingFlags::default();
        let check = |x: usize, x_hat: usize, t: usize, flags: &mut CouplingFlags| {
            if (x == win) != (x_hat == top) {
                flags.violated = true;
            }
            if x_hat == top && flags.dual_hit.is_none() {
                flags.dual_hit = Some(t);
            }
        };
        check(x, x_hat, 0, &mut flags);
        if let Some(p) = path.as_deref_mut() {
            p.primal.push(Some(start_star));
            p.dual.push(x_hat);
        }
        for t in 1..=self.max_steps {
            x = self.primal.sample(x, rng);
            if x == AbsorbingChain::SINK {
                if let Some(p) = path.as_deref_mut() {
                    p.primal.push(None);
                }
                return Ok((Outcome::Lose(t), flags));
            }
            let next_hat = self.dual_step(x_hat, x - 1, rng)?;
            if !space.below(x_hat, next_hat) {
                flags.decreased = true;
            }
            x_hat = next_hat;
            check(x, x_hat, t, &mut flags);
            if let Some(p) = path.as_deref_mut() {
                p.primal.push(Some(x - 1));
                p.dual.push(x_hat);
            }
            if x == win {
                return Ok((Outcome::Win(t), flags));
            }
        }
        Ok((Outcome::Unfinished, flags))
    }
}

/// Simulates the game from `nu_star` together with the coupled dual.
pub fn simulate_coupled(game: &GameSpec, nu_star: &[f64], cfg: &SimConfig) -> Result<SimReport> {
    validate(cfg)?;
    let dual = build_dual(game)?;
    let coupler = Coupler::new(&dual, nu_star, cfg.max_steps)?;
    let results: Vec<Result<(Outcome, CouplingFlags)>> = pool(cfg.workers)?.install(|| {
        (0..cfg.runs)
            .into_par_iter()
            .map(|r| coupler.run(&mut run_rng(cfg.seed, r), None))
            .collect()
    });
    let outcomes = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(summarize(cfg, &outcomes, true))
}

/// The path of run `run` of [`simulate_coupled`].
pub fn coupled_path(game: &GameSpec, nu_star: &[f64], cfg: &SimConfig, run: usize) -> Result<CoupledPath> {
    let dual = build_dual(game)?;
    let coupler = Coupler::new(&dual, nu_star, cfg.max_steps)?;
    let mut path = CoupledPath {
        primal: Vec::new(),
        dual: Vec::new(),
    };
    coupler.run(&mut run_rng(cfg.seed, run), Some(&mut path))?;
    Ok(path)
}

/// The conditional law of the dual's next cell, as `(cell, probability)`.
pub fn coupling_kernel(dual: &Dual, from_hat: usize, to_star: usize) -> Result<Vec<(usize, f64)>> {
    let p_hat = dual.pure_birth.matrix();
    let link = dual.link.matrix();
    let weights: Vec<(usize, f64)> = (0..p_hat.cols())
        .map(|e| (e, p_hat[(from_hat, e)] * link[(e, to_star)]))
        .filter(|(_, w)| *w > 0.0)
        .collect();
    let total: f64 = weights.iter().map(|w| w.1).sum();
    if total <= 0.0 {
        return Err(Error::NumericGuard(format!(
            "zero normalizer for dual cell {from_hat} and primal cell {to_star}"
        )));
    }
    Ok(weights.into_iter().map(|(e, w)| (e, w / total)).collect())
}

fn histogram(times: &[usize]) -> Vec<f64> {
    let Some(&max) = times.iter().max() else {
        return Vec::new();
    };
    let mut h = vec![0.0; max + 1];
    for &t in times {
        h[t] += 1.0;
    }
    let n = times.len() as f64;
    h.iter_mut().for_each(|v| *v /= n);
    h
}

fn mean_se(times: &[usize]) -> (Option<f64>, Option<f64>) {
    if times.is_empty() {
        return (None, None);
    }
    let n = times.len() as f64;
    let mean = times.iter().map(|&t| t as f64).sum::<f64>() / n;
    let se = if times.len() > 1 {
        let var = times.iter().map(|&t| (t as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Some((var / n).sqrt())
    } else {
        None
    };
    (Some(mean), se)
}

fn summarize(cfg: &SimConfig, outcomes: &[(Outcome, CouplingFlags)], coupled: bool) -> SimReport {
    let mut win_times = Vec::new();
    let mut lose_times = Vec::new();
    let mut dual_times = Vec::new();
    let mut unfinished = 0;
    let mut coupling_violations = 0;
    let mut pure_birth_violations = 0;
    for (o, f) in outcomes {
        match o {
            Outcome::Win(t) => {
                win_times.push(*t);
                if let Some(s) = f.dual_hit {
                    dual_times.push(s);
                }
            }
            Outcome::Lose(t) => lose_times.push(*t),
            Outcome::Unfinished => unfinished += 1,
        }
        coupling_violations += f.violated as usize;
        pure_birth_violations += f.decreased as usize;
    }
    let runs = cfg.runs as f64;
    let win_freq = win_times.len() as f64 / runs;
    let horizon_warning = (unfinished as f64 > HORIZON_WARNING_SHARE * runs).then(|| {
        format!(
            "{unfinished} of {} runs did not finish within {} steps",
            cfg.runs, cfg.max_steps
        )
    });
    let (mean_win_time, mean_win_time_se) = mean_se(&win_times);
    let (mean_lose_time, mean_lose_time_se) = mean_se(&lose_times);
    SimReport {
        runs: cfg.runs,
        seed: cfg.seed,
        wins: win_times.len(),
        losses: lose_times.len(),
        unfinished,
        win_freq,
        win_freq_se: (win_freq * (1.0 - win_freq) / runs).sqrt(),
        win_time_pmf: histogram(&win_times),
        lose_time_pmf: histogram(&lose_times),
        mean_win_time,
        mean_win_time_se,
        mean_lose_time,
        mean_lose_time_se,
        horizon_warning,
        coupled,
        coupling_violations,
        pure_birth_violations,
        dual_time_pmf: if coupled { histogram(&dual_times) } else { Vec::new() },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bd::BirthDeathSpec;
    use crate::game::{build_game, preset_r_of_d};

    fn cfg(runs: usize, seed: u64, workers: usize) -> SimConfig {
        SimConfig {
            runs,
            seed,
            max_steps: 100_000,
            workers,
        }
    }

    #[test]
    fn sure_path() {
        let s = BirthDeathSpec::new(2, vec![1.0], vec![0.0]).unwrap();
        let chain = build_game(&preset_r_of_d(vec![s], 1).unwrap()).unwrap();
        let r = simulate(&chain, &[1], &cfg(50, 3, 2)).unwrap();
        assert_eq!(r.win_freq, 1.0);
        assert_eq!(r.win_time_pmf, vec![0.0, 1.0]);
    }

    #[test]
    fn fair_walk_and_reproducibility() {
        let s = BirthDeathSpec::constant(3, 0.25, 0.25).unwrap();
        let chain = build_game(&preset_r_of_d(vec![s], 1).unwrap()).unwrap();
        let a = simulate(&chain, &[2], &cfg(20_000, 11, 1)).unwrap();
        let b = simulate(&chain, &[2], &cfg(20_000, 11, 4)).unwrap();
        assert_eq!(a, b);
        assert!((a.win_freq - 2.0 / 3.0).abs() < 4.0 * a.win_freq_se);
        let c = simulate(&chain, &[2], &cfg(20_000, 12, 4)).unwrap();
        assert_ne!(a, c);
        assert!(simulate(&chain, &[3], &cfg(10, 1, 1)).is_err());
    }

    #[test]
    fn two_state_kernel_by_hand() {
        // N = 2 with ruin possible: Λ = [[1, 0], [0, ρ(1)]] and P̂ steps up
        // with probability 1 - λ_1 = p + q
        let (p, q) = (0.3, 0.2);
        let s = BirthDeathSpec::new(2, vec![p], vec![q]).unwrap();
        let dual = build_dual(&preset_r_of_d(vec![s], 1).unwrap()).unwrap();
        // primal stays at 1: only the dual hold is compatible
        assert_eq!(coupling_kernel(&dual, 0, 0).unwrap(), vec![(0, 1.0)]);
        // primal wins: the dual must step up
        assert_eq!(coupling_kernel(&dual, 0, 1).unwrap(), vec![(1, 1.0)]);
    }

    #[test]
    fn coupled_paths_agree() {
        let s = BirthDeathSpec::new(4, vec![0.3, 0.2, 0.25], vec![0.0, 0.2, 0.15]).unwrap();
        let g = preset_r_of_d(vec![s], 1).unwrap();
        let nu = g.space().delta(&[1]).unwrap();
        let r = simulate_coupled(&g, &nu, &cfg(5_000, 5, 3)).unwrap();
        assert_eq!(r.coupling_violations, 0);
        assert_eq!(r.pure_birth_violations, 0);
        assert_eq!(r.win_time_pmf, r.dual_time_pmf);

        let path = coupled_path(&g, &nu, &cfg(1, 5, 1), 7).unwrap();
        assert!(path.dual.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn signed_dual_start_is_refused() {
        let s = BirthDeathSpec::constant(3, 0.3, 0.1).unwrap();
        let g = preset_r_of_d(vec![s], 1).unwrap();
        let nu = g.space().delta(&[2]).unwrap();
        assert!(matches!(
            simulate_coupled(&g, &nu, &cfg(10, 1, 1)),
            Err(Error::CouplingUnavailable(_))
        ));
    }
}
