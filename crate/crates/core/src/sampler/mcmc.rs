use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Configuration, Point, COINCIDENCE_TOL};
use crate::model::ModelParams;
use crate::quadrature::adaptive_piecewise;
use crate::rng::{rng_from_seed, SimRng};
use crate::stats::ess_geyer;

/// Acceptance rate targeted by step-size adaptation during burn-in.
pub const TARGET_ACCEPTANCE: f64 = 0.30;
/// One independence proposal is made after every this many sweeps.
pub const INDEPENDENCE_EVERY: u64 = 10;
/// Independence proposals are uniform on this disk.
pub const INDEPENDENCE_RADIUS: f64 = 1.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StepScale {
    Auto,
    Fixed(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSpec {
    /// Total number of sweeps, burn-in included.
    pub n_steps: u64,
    pub step_scale: StepScale,
    pub burn_in: u64,
    pub thinning: u64,
    pub seed: u64,
}

impl ChainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps <= self.burn_in {
            return Err(Error::InvalidParameter("n_steps must exceed burn_in".into()));
        }
        if self.thinning == 0 {
            return Err(Error::InvalidParameter("thinning must be at least 1".into()));
        }
        if let StepScale::Fixed(s) = self.step_scale {
            if !(s > 0.0) || !s.is_finite() {
                return Err(Error::InvalidParameter(format!("step scale {s}")));
            }
        }
        Ok(())
    }

    pub fn retained(&self) -> u64 {
        (self.n_steps - self.burn_in) / self.thinning
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProposalLog {
    pub proposed: u64,
    pub accepted: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainDiagnostics {
    /// Random-walk acceptance after burn-in.
    pub acceptance_rate: f64,
    /// Effective sample size of the energy at retained samples.
    pub ess_energy: f64,
    /// Gibbs energy (constants dropped) after every sweep.
    pub energy_trace: Vec<f64>,
    pub retained: usize,
    /// Energy constant over the retained samples.
    pub degenerate: bool,
    pub step_scale: f64,
    pub independence: ProposalLog,
    pub audit_checks: u64,
    /// Largest |ΔE_incremental - ΔE_full| / max(1, |ΔE_full|) seen.
    pub audit_max_discrepancy: f64,
}

/// Builds diagnostics from the retained-sample energies and the proposal log.
pub fn chain_diagnostics(retained_energies: &[f64], energy_trace: Vec<f64>, log: ProposalLog) -> ChainDiagnostics {
    let retained = retained_energies.len();
    let (ess, degenerate) = match ess_geyer(retained_energies) {
        Some(e) => (e, false),
        None => (retained as f64, true),
    };
    ChainDiagnostics {
        acceptance_rate: if log.proposed == 0 { 0.0 } else { log.accepted as f64 / log.proposed as f64 },
        ess_energy: ess,
        energy_trace,
        retained,
        degenerate,
        step_scale: f64::NAN,
        independence: ProposalLog::default(),
        audit_checks: 0,
        audit_max_discrepancy: 0.0,
    }
}

/// Single-particle Metropolis chain targeting exp(-β · gibbs_energy).
pub struct Chain {
    params: ModelParams,
    spec: ChainSpec,
    rng: SimRng,
    pts: Vec<Point>,
    sigma: f64,
    sweep: u64,
    energy: f64,
    rw: ProposalLog,
    rw_after_burn_in: ProposalLog,
    independence: ProposalLog,
    audit_every: Option<u64>,
    audit_checks: u64,
    audit_max: f64,
}

impl Chain {
    pub fn new(params: ModelParams, spec: ChainSpec) -> Result<Self> {
        params.validate()?;
        spec.validate()?;
        let mut rng = rng_from_seed(spec.seed);
        let pts: Vec<Point> = (0..params.n)
            .map(|_| {
                let r = rng.random::<f64>().sqrt();
                Point::polar(r, 2.0 * PI * rng.random::<f64>())
            })
            .collect();
        let energy = params.gibbs_energy(&Configuration::new(pts.clone())?)?;
        let sigma = match spec.step_scale {
            StepScale::Auto => 1.0 / (params.beta * params.n as f64).sqrt(),
            StepScale::Fixed(s) => s,
        };
        Ok(Chain {
            params,
            spec,
            rng,
            pts,
            sigma,
            sweep: 0,
            energy,
            rw: ProposalLog::default(),
            rw_after_burn_in: ProposalLog::default(),
            independence: ProposalLog::default(),
            audit_every: None,
            audit_checks: 0,
            audit_max: 0.0,
        })
    }

    /// Recompute the full target energy on every `every`-th proposal and
    /// compare with the incremental delta.
    pub fn with_audit(mut self, every: u64) -> Self {
        self.audit_every = Some(every.max(1));
        self
    }

    pub fn configuration(&self) -> Configuration {
        Configuration::new(self.pts.clone()).expect("chain states are finite")
    }

    pub fn step_scale(&self) -> f64 {
        self.sigma
    }

    pub fn energy(&self) -> f64 {
        self.energy
    }

    /// Energy change from moving particle `i` to `new`; +∞ on coincidence.
    fn delta(&self, i: usize, new: Point) -> f64 {
        let old = self.pts[i];
        let tol2 = COINCIDENCE_TOL * COINCIDENCE_TOL;
        // -Σ log|new - x_j| + Σ log|old - x_j|, taking one log per block
        let mut log_sum = 0.0;
        let mut prod = 1.0;
        let mut in_block = 0;
        for (j, &q) in self.pts.iter().enumerate() {
            if j == i {
                continue;
            }
            let dn = new.dist_sqr(q);
            if dn < tol2 {
                return f64::INFINITY;
            }
            prod *= old.dist_sqr(q) / dn;
            in_block += 1;
            if in_block == 8 {
                log_sum += prod.ln();
                prod = 1.0;
                in_block = 0;
            }
        }
        log_sum += prod.ln();
        0.5 * log_sum + self.params.one_body(new) - self.params.one_body(old)
    }

    fn try_move(&mut self, i: usize, new: Point, allowed: bool) -> bool {
        let de = if allowed { self.delta(i, new) } else { f64::INFINITY };
        let u: f64 = self.rng.random();
        if let Some(every) = self.audit_every {
            let k = self.rw.proposed + self.independence.proposed;
            if k % every == 0 && de.is_finite() {
                self.audit(i, new, de);
            }
        }
        let accept = de.is_finite() && (de <= 0.0 || u < (-self.params.beta * de).exp());
        if accept {
            self.pts[i] = new;
            self.energy += de;
        }
        accept
    }

    fn audit(&mut self, i: usize, new: Point, de: f64) {
        let before = self.params.gibbs_energy(&self.configuration());
        let mut moved = self.pts.clone();
        moved[i] = new;
        let after = Configuration::new(moved).and_then(|c| self.params.gibbs_energy(&c));
        if let (Ok(a), Ok(b)) = (after, before) {
            let full = a - b;
            let d = (de - full).abs() / full.abs().max(1.0);
            self.audit_max = self.audit_max.max(d);
            self.audit_checks += 1;
        }
    }

    /// One systematic sweep over all particles, plus the periodic
    /// independence proposal. Returns the random-walk acceptance count.
    pub fn sweep(&mut self) -> u64 {
        let n = self.pts.len();
        let mut acc = 0;
        for i in 0..n {
            let dx: f64 = self.rng.sample(StandardNormal);
            let dy: f64 = self.rng.sample(StandardNormal);
            let new = self.pts[i] + Point::new(dx, dy) * self.sigma;
            if self.try_move(i, new, true) {
                acc += 1;
            }
        }
        self.rw.proposed += n as u64;
        self.rw.accepted += acc;
        self.sweep += 1;
        if self.sweep % INDEPENDENCE_EVERY == 0 {
            let i = self.rng.random_range(0..n);
            let r = INDEPENDENCE_RADIUS * self.rng.random::<f64>().sqrt();
            let new = Point::polar(r, 2.0 * PI * self.rng.random::<f64>());
            // proposal density vanishes at the current point outside its disk
            let allowed = self.pts[i].norm() <= INDEPENDENCE_RADIUS;
            self.independence.proposed += 1;
            if self.try_move(i, new, allowed) {
                self.independence.accepted += 1;
            }
        }
        if self.sweep <= self.spec.burn_in {
            if self.spec.step_scale == StepScale::Auto {
                let rate = acc as f64 / n as f64;
                let gain = 1.0 / (self.sweep as f64).powf(0.6);
                self.sigma *= (gain * (rate - TARGET_ACCEPTANCE)).exp();
            }
        } else {
            self.rw_after_burn_in.proposed += n as u64;
            self.rw_after_burn_in.accepted += acc;
        }
        acc
    }

    /// Runs the remaining sweeps, calling `visit(sample_index, sweep, config)`
    /// on every retained sample.
    pub fn run(mut self, mut visit: impl FnMut(u64, u64, &Configuration)) -> Result<ChainDiagnostics> {
        let mut trace = Vec::with_capacity(self.spec.n_steps as usize);
        let mut retained_energy = Vec::with_capacity(self.spec.retained() as usize);
        let mut sample = 0;
        while self.sweep < self.spec.n_steps {
            self.sweep();
            trace.push(self.energy);
            if self.sweep > self.spec.burn_in && (self.sweep - self.spec.burn_in) % self.spec.thinning == 0 {
                let c = self.configuration();
                // resynchronize the running energy to limit drift
                self.energy = self.params.gibbs_energy(&c)?;
                retained_energy.push(self.energy);
                visit(sample, self.sweep, &c);
                sample += 1;
            }
        }
        let mut d = chain_diagnostics(&retained_energy, trace, self.rw_after_burn_in);
        d.step_scale = self.sigma;
        d.independence = self.independence;
        d.audit_checks = self.audit_checks;
        d.audit_max_discrepancy = self.audit_max;
        if self.spec.step_scale == StepScale::Auto && d.acceptance_rate < 0.01 {
            return Err(Error::DegenerateChain(d.acceptance_rate));
        }
        Ok(d)
    }
}

/// Collects all retained samples of a chain.
pub fn mcmc_sample(params: ModelParams, spec: ChainSpec) -> Result<(Vec<Configuration>, ChainDiagnostics)> {
    let mut out = Vec::with_capacity(spec.retained() as usize);
    let d = Chain::new(params, spec)?.run(|_, _, c| out.push(c.clone()))?;
    Ok((out, d))
}

/// E|x|² for a single particle (N = 1) with weight exp(-β · one_body), by
/// radial quadrature.
pub fn one_particle_moment2(params: &ModelParams) -> Result<f64> {
    params.validate()?;
    let v = |r: f64| params.one_body(Point::new(r, 0.0));
    let r_max = 1.0 + (80.0 / (params.beta * params.n as f64)).sqrt();
    let breaks = [0.0, 0.5, 1.0, 0.5 * (1.0 + r_max), r_max];
    let z = adaptive_piecewise(|r| r * (-params.beta * v(r)).exp(), &breaks, 1e-15, 1e-13)?;
    let m = adaptive_piecewise(|r| r * r * r * (-params.beta * v(r)).exp(), &breaks, 1e-15, 1e-13)?;
    Ok(m / z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Ensemble;

    fn spec(seed: u64) -> ChainSpec {
        ChainSpec { n_steps: 400, step_scale: StepScale::Auto, burn_in: 100, thinning: 3, seed }
    }

    #[test]
    fn chain_is_deterministic() {
        let p = ModelParams::new(12, 2.0, Ensemble::CanonicalF).unwrap();
        let (a, da) = mcmc_sample(p, spec(9)).unwrap();
        let (b, db) = mcmc_sample(p, spec(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(da, db);
        assert_eq!(a.len(), 100);
        let (c, _) = mcmc_sample(p, spec(10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn incremental_energy_matches_full_recomputation() {
        for ens in [Ensemble::CanonicalF, Ensemble::PureQuadratic] {
            let p = ModelParams::new(20, 1.0, ens).unwrap();
            let d = Chain::new(p, spec(3)).unwrap().with_audit(1000).run(|_, _, _| {}).unwrap();
            assert!(d.audit_checks >= 10);
            assert!(d.audit_max_discrepancy < 1e-9, "{}", d.audit_max_discrepancy);
        }
    }

    #[test]
    fn tuning_reaches_target_band() {
        let p = ModelParams::new(30, 2.0, Ensemble::CanonicalF).unwrap();
        let s = ChainSpec { n_steps: 1500, step_scale: StepScale::Auto, burn_in: 500, thinning: 10, seed: 1 };
        let d = Chain::new(p, s).unwrap().run(|_, _, _| {}).unwrap();
        assert!((d.acceptance_rate - TARGET_ACCEPTANCE).abs() < 0.07, "{}", d.acceptance_rate);
        assert!(d.ess_energy <= d.retained as f64);
    }

    #[test]
    fn invalid_specs_rejected() {
        let p = ModelParams::new(4, 2.0, Ensemble::CanonicalF).unwrap();
        let mut s = spec(0);
        s.burn_in = s.n_steps;
        assert!(Chain::new(p, s).is_err());
        let mut s = spec(0);
        s.thinning = 0;
        assert!(Chain::new(p, s).is_err());
        let mut s = spec(0);
        s.step_scale = StepScale::Fixed(-1.0);
        assert!(Chain::new(p, s).is_err());
        let bad = ModelParams { n: 4, beta: -1.0, ensemble: Ensemble::CanonicalF };
        assert!(matches!(Chain::new(bad, spec(0)), Err(Error::NonPositiveBeta(_))));
    }

    #[test]
    fn huge_fixed_step_is_degenerate_but_not_an_error() {
        let p = ModelParams::new(50, 2.0, Ensemble::CanonicalF).unwrap();
        let s = ChainSpec { n_steps: 30, step_scale: StepScale::Fixed(1e3), burn_in: 0, thinning: 1, seed: 2 };
        let d = Chain::new(p, s).unwrap().run(|_, _, _| {}).unwrap();
        assert!(d.acceptance_rate < 0.01);
    }

    #[test]
    fn diagnostics_of_synthetic_traces() {
        let d = chain_diagnostics(&[1.0; 50], vec![1.0; 50], ProposalLog { proposed: 10, accepted: 4 });
        assert!(d.degenerate);
        assert_eq!(d.ess_energy, 50.0);
        assert_eq!(d.acceptance_rate, 0.4);
        let alt: Vec<f64> = (0..100).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let d = chain_diagnostics(&alt, alt.clone(), ProposalLog { proposed: 100, accepted: 100 });
        assert_eq!(d.acceptance_rate, 1.0);
        assert!(!d.degenerate);
    }

    #[test]
    fn one_particle_oracle_pure_quadratic() {
        // weight exp(-β r²/2): E r² = 2/β
        for beta in [1.0, 2.0, 4.0] {
            let p = ModelParams::new(1, beta, Ensemble::PureQuadratic).unwrap();
            assert!((one_particle_moment2(&p).unwrap() - 2.0 / beta).abs() < 1e-10);
        }
    }
}
