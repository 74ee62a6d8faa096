//! Linear rate-equation model of selective optical pumping.
//!
//! Six populations per ensemble class: the four neutral-donor hyperfine
//! states (canonical order) followed by the ionized donor with nuclear spin
//! up and down. Bound excitons are adiabatically eliminated: an excitation
//! event ends in Auger ionization with probability `eta`, otherwise the
//! donor returns radiatively to the state it left (no net flow, so that
//! branch does not appear in the generator).
//!
//! Processes encoded in the generator:
//! * pumped ionization `s -> D+(same nucleus)` at `excitation[s] * eta`
//! * continuum photoionization of every donor state at `beta * intensity`
//! * capture `D+ -> (up | down, same nucleus)` at `gamma_c / 2` each
//! * electron relaxation `W` within each nuclear manifold
//! * flip-flop cross relaxation `R` between the anti-parallel states
//! * above-gap equalization `G`: donor states relax toward their mean, D+
//!   neutralizes into the four donor states equally
//! * nuclear flips with `T1n` in each electron manifold and in D+
//!
//! `W`, `R` and nuclear flips obey detailed balance at the lattice
//! temperature when one is configured.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::lineshape::{homogeneous_profile, EnsembleClass, LineshapeModel};
use crate::linalg::SquareMatrix;
use crate::real::{c, Real};
use crate::spin_system::{DonorEigensystem, HyperfineState, PopulationVector, TransitionCatalog};

/// Number of populations tracked per class.
pub const STATE_COUNT: usize = 6;
/// Index of the ionized donor with nuclear spin up.
pub const IONIZED_UP: usize = 4;
/// Index of the ionized donor with nuclear spin down.
pub const IONIZED_DOWN: usize = 5;

pub type Generator<T> = SquareMatrix<T, STATE_COUNT>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KineticsError {
    #[error("invalid rate parameter `{name}` = {value}: {reason}")]
    InvalidRate {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("excitation rate for {state} is negative or not finite")]
    InvalidExcitation { state: &'static str },
    #[error("steady state is not unique ({closed_classes} closed communicating classes)")]
    NonUniqueSteadyState { closed_classes: usize },
    #[error("steady-state linear system is singular")]
    SingularSystem,
    #[error("start state is not normalized (sum = {sum})")]
    UnnormalizedStart { sum: f64 },
    #[error("start state has a negative or non-finite entry")]
    InvalidStart,
    #[error("time grid must be nonnegative and nondecreasing")]
    InvalidTimeGrid,
    #[error("ensemble has {classes} classes but {generators} generators")]
    EnsembleMismatch { classes: usize, generators: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateConfig<T> {
    /// Reference on-resonance excitation rate of a pumped donor state at
    /// unit pump intensity, 1/s. Laser intensities are measured against it.
    pub pump_peak_rate_p0: T,
    /// Electron spin relaxation rate (mean of the up/down rates), 1/s.
    pub w: T,
    /// Flip-flop cross relaxation rate between the anti-parallel states, 1/s.
    pub r: T,
    /// Probability that an exciton decays by Auger ionization.
    pub auger_fraction_eta: T,
    /// Electron capture rate of an ionized donor, 1/s.
    pub capture_rate_gamma_c: T,
    /// Nonselective photoionization rate per unit optical intensity, 1/s.
    pub continuum_beta: T,
    /// Above-gap equalization rate, 1/s.
    pub above_gap_g: T,
    /// Nuclear relaxation time, s.
    pub nuclear_t1: T,
    /// Lattice temperature for detailed balance, K. `None` makes every
    /// relaxation pair symmetric.
    pub detailed_balance_t: Option<T>,
    /// Exciton lifetime, s. Informational: excitons are eliminated.
    pub exciton_lifetime: T,
}

impl<T: Real> RateConfig<T> {
    pub fn validate(&self) -> Result<(), KineticsError> {
        let bad = |name, value: T, reason| KineticsError::InvalidRate {
            name,
            value: value.as_f64(),
            reason,
        };
        let nonneg: [(&'static str, T); 6] = [
            ("pump_peak_rate_P0", self.pump_peak_rate_p0),
            ("W", self.w),
            ("R", self.r),
            ("capture_rate_gamma_c", self.capture_rate_gamma_c),
            ("continuum_beta", self.continuum_beta),
            ("above_gap_G", self.above_gap_g),
        ];
        for (name, v) in nonneg {
            if !v.is_finite() || v < T::zero() {
                return Err(bad(name, v, "must be finite and >= 0"));
            }
        }
        if !(self.pump_peak_rate_p0 > T::zero()) {
            return Err(bad("pump_peak_rate_P0", self.pump_peak_rate_p0, "reference rate must be > 0"));
        }
        let eta = self.auger_fraction_eta;
        if !eta.is_finite() || eta < T::zero() || eta > T::one() {
            return Err(bad("auger_fraction_eta", eta, "must lie in [0, 1]"));
        }
        if self.nuclear_t1.is_nan() || self.nuclear_t1 <= T::zero() {
            return Err(bad("nuclear_T1", self.nuclear_t1, "must be > 0"));
        }
        if let Some(t) = self.detailed_balance_t {
            if !t.is_finite() || t <= T::zero() {
                return Err(bad("detailed_balance_T", t, "must be finite and > 0"));
            }
        }
        if !self.exciton_lifetime.is_finite() || self.exciton_lifetime < T::zero() {
            return Err(bad("exciton_lifetime", self.exciton_lifetime, "must be finite and >= 0"));
        }
        Ok(())
    }

    /// Same configuration with every optically driven process removed.
    pub fn dark(&self) -> Self {
        Self {
            above_gap_g: T::zero(),
            ..*self
        }
    }
}

/// Populations of one class: four donor states then `D+ up`, `D+ down`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KineticState<T>(pub [T; STATE_COUNT]);

impl<T: Real> KineticState<T> {
    /// Equal donor populations, nothing ionized.
    pub fn equalized() -> Self {
        let q = c::<T>(0.25);
        Self([q, q, q, q, T::zero(), T::zero()])
    }

    pub fn from_population(p: &PopulationVector<T>) -> Self {
        let half = c::<T>(0.5) * p.ionized;
        Self([p.d0[0], p.d0[1], p.d0[2], p.d0[3], half, half])
    }

    pub fn total(&self) -> T {
        self.0.iter().copied().sum()
    }

    pub fn donor(&self, state: HyperfineState) -> T {
        self.0[state.index()]
    }

    pub fn ionized(&self) -> T {
        self.0[IONIZED_UP] + self.0[IONIZED_DOWN]
    }

    pub fn population_vector(&self) -> PopulationVector<T> {
        PopulationVector {
            d0: [self.0[0], self.0[1], self.0[2], self.0[3]],
            ionized: self.ionized(),
        }
    }

    /// Nuclear spin-up minus spin-down fraction over all six states.
    pub fn nuclear_difference(&self) -> T {
        let s = &self.0;
        (s[0] + s[3] + s[IONIZED_UP]) - (s[1] + s[2] + s[IONIZED_DOWN])
    }

    fn validate_start(&self) -> Result<(), KineticsError> {
        if self.0.iter().any(|v| !v.is_finite() || *v < -c::<T>(1e-12)) {
            return Err(KineticsError::InvalidStart);
        }
        let sum = self.total();
        if (sum - T::one()).abs() > c(1e-9) {
            return Err(KineticsError::UnnormalizedStart { sum: sum.as_f64() });
        }
        Ok(())
    }
}

/// Optical drive of one class: per-state selective excitation rates and the
/// total optical intensity (in units of the reference pump) that drives the
/// continuum.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OpticalDrive<T> {
    pub excitation: [T; 4],
    pub intensity: T,
}

impl<T: Real> OpticalDrive<T> {
    pub fn dark() -> Self {
        Self {
            excitation: [T::zero(); 4],
            intensity: T::zero(),
        }
    }

    pub fn combined(&self, other: &Self) -> Self {
        let mut excitation = self.excitation;
        for (e, o) in excitation.iter_mut().zip(other.excitation.iter()) {
            *e += *o;
        }
        Self {
            excitation,
            intensity: self.intensity + other.intensity,
        }
    }
}

/// Per-state excitation rates from one laser acting on one class.
pub fn pump_rates<T: Real>(
    laser_energy: T,
    laser_peak_rate: T,
    class: &EnsembleClass<T>,
    catalog: &TransitionCatalog<T>,
    model: &LineshapeModel<T>,
) -> [T; 4] {
    let mut rates = [T::zero(); 4];
    for line in &catalog.lines {
        let detuning = laser_energy - (line.energy + class.detuning_offset);
        rates[line.initial_state.index()] += laser_peak_rate * line.strength * homogeneous_profile(detuning, model);
    }
    rates
}

/// Rate-process bookkeeping carried alongside the matrix.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProcessRates<T> {
    pub excitation: [T; 4],
    pub continuum: T,
    pub capture: T,
    pub w: T,
    pub r: T,
    pub above_gap: T,
    pub nuclear_flip: T,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RateGenerator<T> {
    /// `dn/dt = matrix * n`; entry `(to, from)`.
    pub matrix: Generator<T>,
    pub processes: ProcessRates<T>,
}

/// Downhill and uphill rates of a pair whose mean rate is `mean`, with the
/// Boltzmann ratio between them. `gap = E_from - E_to`.
fn balanced_pair<T: Real>(mean: T, gap: T, kt: Option<T>) -> (T, T) {
    match kt {
        None => (mean, mean),
        Some(kt) => {
            let x = gap / kt;
            // forward = 2 mean / (1 + e^-x), backward = forward e^-x
            let e = (-x.abs()).exp();
            let two = c::<T>(2.0) * mean;
            let (big, small) = (two / (T::one() + e), two * e / (T::one() + e));
            if x >= T::zero() {
                (big, small)
            } else {
                (small, big)
            }
        }
    }
}

pub fn build_generator<T: Real>(
    drive: &OpticalDrive<T>,
    cfg: &RateConfig<T>,
    eigensystem: &DonorEigensystem<T>,
    nuclear_zeeman: T,
) -> Result<RateGenerator<T>, KineticsError> {
    cfg.validate()?;
    for (i, e) in drive.excitation.iter().enumerate() {
        if !e.is_finite() || *e < T::zero() {
            return Err(KineticsError::InvalidExcitation {
                state: HyperfineState::ALL[i].ascii(),
            });
        }
    }
    if !drive.intensity.is_finite() || drive.intensity < T::zero() {
        return Err(KineticsError::InvalidRate {
            name: "optical intensity",
            value: drive.intensity.as_f64(),
            reason: "must be finite and >= 0",
        });
    }

    let kt = cfg
        .detailed_balance_t
        .map(|t| t * c::<T>(crate::spin_system::BOLTZMANN_MHZ_PER_K));
    let mut m = Generator::<T>::zeros();
    let mut flow = |from: usize, to: usize, rate: T| {
        if rate > T::zero() {
            m.0[to][from] += rate;
        }
    };
    let energy = |s: HyperfineState| eigensystem.energy(s);
    let ionized_of = |s: HyperfineState| match s.nuclear {
        crate::spin_system::NuclearSpin::Up => IONIZED_UP,
        crate::spin_system::NuclearSpin::Down => IONIZED_DOWN,
    };

    let continuum = cfg.continuum_beta * drive.intensity;
    for s in HyperfineState::ALL {
        let i = s.index();
        flow(i, ionized_of(s), drive.excitation[i] * cfg.auger_fraction_eta + continuum);
    }

    let half_capture = c::<T>(0.5) * cfg.capture_rate_gamma_c;
    for (ion, up, down) in [
        (IONIZED_UP, HyperfineState::UP_UP, HyperfineState::DOWN_UP),
        (IONIZED_DOWN, HyperfineState::UP_DOWN, HyperfineState::DOWN_DOWN),
    ] {
        flow(ion, up.index(), half_capture);
        flow(ion, down.index(), half_capture);
    }

    let mut pair = |a: HyperfineState, b: HyperfineState, mean: T| {
        let (ab, ba) = balanced_pair(mean, energy(a) - energy(b), kt);
        flow(a.index(), b.index(), ab);
        flow(b.index(), a.index(), ba);
    };
    pair(HyperfineState::UP_UP, HyperfineState::DOWN_UP, cfg.w);
    pair(HyperfineState::UP_DOWN, HyperfineState::DOWN_DOWN, cfg.w);
    pair(HyperfineState::UP_DOWN, HyperfineState::DOWN_UP, cfg.r);

    let nuclear_mean = c::<T>(0.5) / cfg.nuclear_t1;
    pair(HyperfineState::UP_UP, HyperfineState::UP_DOWN, nuclear_mean);
    pair(HyperfineState::DOWN_UP, HyperfineState::DOWN_DOWN, nuclear_mean);
    {
        // D+ up lies below D+ down by the nuclear Zeeman energy
        let (ud, du) = balanced_pair(nuclear_mean, -nuclear_zeeman, kt);
        flow(IONIZED_UP, IONIZED_DOWN, ud);
        flow(IONIZED_DOWN, IONIZED_UP, du);
    }

    let quarter_g = c::<T>(0.25) * cfg.above_gap_g;
    for from in 0..STATE_COUNT {
        for to in 0..4 {
            if to != from {
                flow(from, to, quarter_g);
            }
        }
    }

    for j in 0..STATE_COUNT {
        let out: T = (0..STATE_COUNT).filter(|&i| i != j).map(|i| m.0[i][j]).sum();
        m.0[j][j] = -out;
    }

    Ok(RateGenerator {
        matrix: m,
        processes: ProcessRates {
            excitation: drive.excitation,
            continuum,
            capture: cfg.capture_rate_gamma_c,
            w: cfg.w,
            r: cfg.r,
            above_gap: cfg.above_gap_g,
            nuclear_flip: T::one() / cfg.nuclear_t1,
        },
    })
}

impl<T: Real> RateGenerator<T> {
    pub fn zero() -> Self {
        Self {
            matrix: Generator::zeros(),
            processes: ProcessRates {
                excitation: [T::zero(); 4],
                continuum: T::zero(),
                capture: T::zero(),
                w: T::zero(),
                r: T::zero(),
                above_gap: T::zero(),
                nuclear_flip: T::zero(),
            },
        }
    }

    /// Largest total outflow rate of any state.
    pub fn max_rate(&self) -> T {
        (0..STATE_COUNT).map(|i| -self.matrix.0[i][i]).fold(T::zero(), T::max)
    }

    /// Number of closed communicating classes of the transition graph.
    pub fn closed_classes(&self) -> usize {
        let n = STATE_COUNT;
        let mut reach = [[false; STATE_COUNT]; STATE_COUNT];
        for (i, row) in reach.iter_mut().enumerate() {
            row[i] = true;
            for (j, r) in row.iter_mut().enumerate() {
                if i != j && self.matrix.0[j][i] > T::zero() {
                    *r = true;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                if reach[i][k] {
                    for j in 0..n {
                        if reach[k][j] {
                            reach[i][j] = true;
                        }
                    }
                }
            }
        }
        let mut counted = [false; STATE_COUNT];
        let mut closed = 0;
        for i in 0..n {
            if counted[i] {
                continue;
            }
            let class: Vec<usize> = (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
            for &j in &class {
                counted[j] = true;
            }
            let leaves = class.iter().any(|&a| (0..n).any(|b| reach[a][b] && !class.contains(&b)));
            if !leaves {
                closed += 1;
            }
        }
        closed
    }
}

/// Unique stationary distribution of the generator.
pub fn steady_state<T: Real>(gen: &RateGenerator<T>) -> Result<KineticState<T>, KineticsError> {
    let closed = gen.closed_classes();
    if closed != 1 {
        return Err(KineticsError::NonUniqueSteadyState { closed_classes: closed });
    }
    // Replace the balance equation of the fastest state with normalization.
    let mut a = gen.matrix;
    let pivot_row = (0..STATE_COUNT)
        .max_by(|&i, &j| (-a.0[i][i]).partial_cmp(&(-a.0[j][j])).unwrap())
        .unwrap();
    for j in 0..STATE_COUNT {
        a.0[pivot_row][j] = T::one();
    }
    let mut rhs = [T::zero(); STATE_COUNT];
    rhs[pivot_row] = T::one();
    let x = a
        .solve_vec(&rhs, T::min_positive_value())
        .ok_or(KineticsError::SingularSystem)?;
    let mut out = x.map(|v| if v < T::zero() { T::zero() } else { v });
    let total: T = out.iter().copied().sum();
    for v in out.iter_mut() {
        *v /= total;
    }
    Ok(KineticState(out))
}

/// Propagator `exp(matrix * dt)` with columns corrected to sum to one.
pub fn propagator<T: Real>(gen: &RateGenerator<T>, dt: T) -> Generator<T> {
    let mut p = gen.matrix.scale(dt).expm();
    for j in 0..STATE_COUNT {
        let off: T = (0..STATE_COUNT).filter(|&i| i != j).map(|i| p.0[i][j]).sum();
        p.0[j][j] = T::one() - off;
    }
    p
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<T> {
    pub times: Vec<T>,
    pub states: Vec<KineticState<T>>,
}

/// Largest `dt * max_rate` handled by a single matrix exponential.
const MAX_STEP_RATE_TIME: f64 = 1e6;

/// Solves `dn/dt = G n` from `start` at `t = 0`, reporting the state at
/// each requested time. Steps use exact matrix-exponential propagation, so
/// stiffness does not limit the step size.
pub fn integrate<T: Real>(
    gen: &RateGenerator<T>,
    start: &KineticState<T>,
    times: &[T],
) -> Result<Trajectory<T>, KineticsError> {
    start.validate_start()?;
    if times.iter().any(|t| !t.is_finite() || *t < T::zero()) || times.windows(2).any(|w| w[1] < w[0]) {
        return Err(KineticsError::InvalidTimeGrid);
    }
    let mut cache: HashMap<u64, Generator<T>> = HashMap::new();
    let mut state = start.0;
    let mut t_prev = T::zero();
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let dt = t - t_prev;
        if dt > T::zero() {
            // squaring a propagator over ~1e10 rate-times loses about 1e-8,
            // so very long intervals are split into equal sub-steps
            let substeps = (dt * gen.max_rate() / c(MAX_STEP_RATE_TIME)).ceil().as_f64().clamp(1.0, 1e7) as usize;
            let h = dt / T::from_usize_lossy(substeps);
            let key = h.as_f64().to_bits();
            let p = cache.entry(key).or_insert_with(|| propagator(gen, h));
            for _ in 0..substeps {
                state = p.mul_vec(&state);
            }
        }
        t_prev = t;
        states.push(KineticState(state));
    }
    Ok(Trajectory {
        times: times.to_vec(),
        states,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSolution<T> {
    pub aggregate: KineticState<T>,
    pub per_class: Vec<KineticState<T>>,
}

/// Steady state of every class and their weighted aggregate (summed in
/// class order).
pub fn ensemble_solve<T: Real>(
    classes: &[EnsembleClass<T>],
    generators: &[RateGenerator<T>],
) -> Result<EnsembleSolution<T>, KineticsError> {
    if classes.len() != generators.len() {
        return Err(KineticsError::EnsembleMismatch {
            classes: classes.len(),
            generators: generators.len(),
        });
    }
    let per_class = generators.iter().map(steady_state).collect::<Result<Vec<_>, _>>()?;
    Ok(EnsembleSolution {
        aggregate: aggregate(classes, &per_class),
        per_class,
    })
}

/// Weighted sum of per-class states.
pub fn aggregate<T: Real>(classes: &[EnsembleClass<T>], states: &[KineticState<T>]) -> KineticState<T> {
    let mut acc = [T::zero(); STATE_COUNT];
    for (cls, st) in classes.iter().zip(states.iter()) {
        for (a, v) in acc.iter_mut().zip(st.0.iter()) {
            *a += cls.weight * *v;
        }
    }
    KineticState(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin_system::{donor_eigensystem, DonorParams};

    fn cfg() -> RateConfig<f64> {
        RateConfig {
            pump_peak_rate_p0: 1e5,
            w: 10.0,
            r: 20.0,
            auger_fraction_eta: 0.95,
            capture_rate_gamma_c: 1e4,
            continuum_beta: 0.0,
            above_gap_g: 0.0,
            nuclear_t1: f64::INFINITY,
            detailed_balance_t: None,
            exciton_lifetime: 272e-9,
        }
    }

    fn eig() -> DonorEigensystem<f64> {
        donor_eigensystem(&DonorParams::default()).unwrap()
    }

    fn generator(drive: OpticalDrive<f64>, cfg: &RateConfig<f64>) -> RateGenerator<f64> {
        build_generator(&drive, cfg, &eig(), 0.0).unwrap()
    }

    #[test]
    fn columns_sum_to_zero() {
        let mut c = cfg();
        c.continuum_beta = 50.0;
        c.above_gap_g = 3.0;
        c.nuclear_t1 = 100.0;
        c.detailed_balance_t = Some(1.4);
        let g = generator(
            OpticalDrive {
                excitation: [1.0, 2e5, 3.0, 0.5],
                intensity: 1.0,
            },
            &c,
        );
        for j in 0..STATE_COUNT {
            let s: f64 = (0..STATE_COUNT).map(|i| g.matrix.0[i][j]).sum();
            assert!(s.abs() <= 1e-12 * g.max_rate(), "column {j}: {s}");
            for i in 0..STATE_COUNT {
                if i != j {
                    assert!(g.matrix.0[i][j] >= 0.0);
                }
            }
        }
    }

    #[test]
    fn dark_generator_drains_ionized_donors() {
        let mut c = cfg();
        c.w = 0.0;
        c.r = 0.0;
        let g = generator(OpticalDrive::dark(), &c);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g.matrix.0[i][j], 0.0);
            }
            assert_eq!(g.matrix.0[IONIZED_UP][i], 0.0);
            assert_eq!(g.matrix.0[IONIZED_DOWN][i], 0.0);
        }
        assert_eq!(g.matrix.0[IONIZED_UP][IONIZED_UP], -1e4);
        assert_eq!(g.matrix.0[0][IONIZED_UP], 5e3);
    }

    #[test]
    fn equalization_fixed_point() {
        let mut c = cfg();
        c.w = 0.0;
        c.r = 0.0;
        c.above_gap_g = 100.0;
        let ss = steady_state(&generator(OpticalDrive::dark(), &c)).unwrap();
        for i in 0..4 {
            assert!((ss.0[i] - 0.25).abs() < 1e-14);
        }
        assert!(ss.ionized() < 1e-14);
    }

    #[test]
    fn all_zero_rates_are_not_unique() {
        let mut c = cfg();
        c.w = 0.0;
        c.r = 0.0;
        let g = generator(OpticalDrive::dark(), &c);
        assert!(matches!(
            steady_state(&g),
            Err(KineticsError::NonUniqueSteadyState { closed_classes: 4 })
        ));
    }

    #[test]
    fn detailed_balance_ratio() {
        let mut c = cfg();
        c.r = 0.0;
        c.capture_rate_gamma_c = 0.0;
        c.detailed_balance_t = Some(1.4);
        c.nuclear_t1 = 1e-3;
        let e = eig();
        let g = build_generator(&OpticalDrive::dark(), &c, &e, 0.0).unwrap();
        let (down, up) = (g.matrix.0[3][0], g.matrix.0[0][3]);
        let gap = e.energy(HyperfineState::UP_UP) - e.energy(HyperfineState::DOWN_UP);
        let expected = (gap / (1.4 * crate::spin_system::BOLTZMANN_MHZ_PER_K)).exp();
        assert!((down / up - expected).abs() < 1e-12);
        assert!((down / up - 1.04).abs() < 0.005, "{}", down / up);
        assert!((down + up - 2.0 * c.w).abs() < 1e-12);
    }

    #[test]
    fn pumped_anti_parallel_state_empties() {
        let mut c = cfg();
        c.w = 0.0;
        c.r = 0.0;
        c.auger_fraction_eta = 1.0;
        c.capture_rate_gamma_c = 1e7;
        let g = generator(
            OpticalDrive {
                excitation: [0.0, 1e5, 0.0, 0.0],
                intensity: 1.0,
            },
            &c,
        );
        // the nuclear manifolds never mix, so the steady state is not unique
        assert!(steady_state(&g).is_err());
        let traj = integrate(&g, &KineticState::equalized(), &[1e4 / 1e5]).unwrap();
        let end = traj.states[0];
        assert!(end.0[1] < 1e-12);
        assert!((end.0[2] - 0.5).abs() < 1e-9);
        assert!((end.0[0] - 0.25).abs() < 1e-12 && (end.0[3] - 0.25).abs() < 1e-12);
    }

    #[test]
    fn two_state_relaxation_is_exponential() {
        let mut c = cfg();
        c.r = 0.0;
        c.capture_rate_gamma_c = 0.0;
        c.detailed_balance_t = Some(0.05);
        let e = eig();
        let g = build_generator(&OpticalDrive::dark(), &c, &e, 0.0).unwrap();
        let start = KineticState([1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let times: Vec<f64> = (0..50).map(|i| i as f64 * 0.004).collect();
        let traj = integrate(&g, &start, &times).unwrap();
        let (down, up) = (g.matrix.0[3][0], g.matrix.0[0][3]);
        let k = down + up;
        for (t, s) in traj.times.iter().zip(traj.states.iter()) {
            let eq = up / k;
            let expected = eq + (1.0 - eq) * (-k * t).exp();
            assert!((s.0[0] - expected).abs() < 1e-10, "{t}");
        }
    }

    #[test]
    fn zero_generator_keeps_state() {
        let g = RateGenerator::<f64>::zero();
        let s = KineticState([0.1, 0.2, 0.3, 0.4, 0.0, 0.0]);
        let traj = integrate(&g, &s, &[0.0, 1.0, 1e6]).unwrap();
        assert!(traj.states.iter().all(|x| *x == s));
    }

    #[test]
    fn bad_starts_and_grids_are_rejected() {
        let g = RateGenerator::<f64>::zero();
        let s = KineticState([0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(matches!(integrate(&g, &s, &[1.0]), Err(KineticsError::UnnormalizedStart { .. })));
        let s = KineticState::<f64>::equalized();
        assert!(matches!(integrate(&g, &s, &[1.0, 0.5]), Err(KineticsError::InvalidTimeGrid)));
    }

    #[test]
    fn invalid_rates_are_rejected() {
        let mut c = cfg();
        c.auger_fraction_eta = 1.5;
        assert!(build_generator(&OpticalDrive::dark(), &c, &eig(), 0.0).is_err());
        let c = cfg();
        let drive = OpticalDrive {
            excitation: [0.0, -1.0, 0.0, 0.0],
            intensity: 0.0,
        };
        assert!(matches!(
            build_generator(&drive, &c, &eig(), 0.0),
            Err(KineticsError::InvalidExcitation { state: "upDown" })
        ));
    }

    #[test]
    fn ensemble_of_identical_classes() {
        let mut c = cfg();
        c.above_gap_g = 1.0;
        c.nuclear_t1 = 10.0;
        let drive = OpticalDrive {
            excitation: [0.0, 1e5, 0.0, 0.0],
            intensity: 1.0,
        };
        let g = generator(drive, &c);
        let single = ensemble_solve(&[EnsembleClass::single()], &[g]).unwrap();
        assert_eq!(single.aggregate, steady_state(&g).unwrap());
        let half = EnsembleClass {
            detuning_offset: 0.0,
            weight: 0.5,
        };
        let pair = ensemble_solve(&[half, half], &[g, g]).unwrap();
        for i in 0..STATE_COUNT {
            assert!((pair.aggregate.0[i] - single.aggregate.0[i]).abs() < 1e-15);
        }
        assert!(matches!(
            ensemble_solve(&[half], &[g, g]),
            Err(KineticsError::EnsembleMismatch { .. })
        ));
    }
}
