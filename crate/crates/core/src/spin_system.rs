//! Neutral-donor hyperfine levels, the bound-exciton transition catalog and
//! population/polarization arithmetic.
//!
//! Energies are frequencies in MHz. Donor level energies are given relative
//! to the centroid of the four hyperfine levels; transition energies are
//! offsets from a configurable optical band center.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::real::{c, Real};

/// Bohr magneton over Planck's constant, MHz/T.
pub const BOHR_MAGNETON_MHZ_PER_T: f64 = 13_996.244_936;
/// Nuclear magneton over Planck's constant, MHz/T.
pub const NUCLEAR_MAGNETON_MHZ_PER_T: f64 = 7.622_593_229;
/// Boltzmann constant over Planck's constant, MHz/K.
pub const BOLTZMANN_MHZ_PER_K: f64 = 20_836.619_12;

/// Zero-field singlet-triplet splitting of the 31P donor, MHz.
pub const PHOSPHORUS_HYPERFINE_MHZ: f64 = 117.53;
/// Donor electron g-factor (literature value).
pub const DONOR_G_ELECTRON: f64 = 1.9985;
/// 31P nuclear g-factor (literature value).
pub const PHOSPHORUS_G_NUCLEAR: f64 = 2.263;
/// Default field, mT. Chosen so the thermal electron polarization at the
/// default temperature is about 2 %.
pub const DEFAULT_FIELD_MT: f64 = 42.0;
pub const DEFAULT_TEMPERATURE_K: f64 = 1.4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpinError {
    #[error("invalid donor parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("doublets {lower} and {upper} interleave; the catalog cannot be ordered by energy")]
    InterleavedDoublets { lower: usize, upper: usize },
    #[error("doublet {doublet}: the anti-parallel line is not the higher-energy component")]
    DoubletOrder { doublet: usize },
    #[error("line strength {index} is negative or not finite")]
    InvalidStrength { index: usize },
    #[error("populations sum to {sum:.3} %, expected 100 %")]
    Unnormalized { sum: f64 },
    #[error("populations must be finite and nonnegative")]
    NegativePopulation,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElectronSpin {
    Up,
    Down,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NuclearSpin {
    Up,
    Down,
}

impl ElectronSpin {
    pub fn flipped(self) -> Self {
        match self {
            ElectronSpin::Up => ElectronSpin::Down,
            ElectronSpin::Down => ElectronSpin::Up,
        }
    }

    /// +1 for up, -1 for down.
    pub fn sign<T: Real>(self) -> T {
        match self {
            ElectronSpin::Up => T::one(),
            ElectronSpin::Down => -T::one(),
        }
    }
}

impl NuclearSpin {
    pub fn flipped(self) -> Self {
        match self {
            NuclearSpin::Up => NuclearSpin::Down,
            NuclearSpin::Down => NuclearSpin::Up,
        }
    }

    pub fn sign<T: Real>(self) -> T {
        match self {
            NuclearSpin::Up => T::one(),
            NuclearSpin::Down => -T::one(),
        }
    }
}

/// One of the four neutral-donor hyperfine states.
///
/// The two anti-parallel labels denote the field-adiabatic eigenstates that
/// connect to the pure product states at high field.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HyperfineState {
    pub electron: ElectronSpin,
    pub nuclear: NuclearSpin,
}

impl HyperfineState {
    pub const UP_UP: Self = Self::new(ElectronSpin::Up, NuclearSpin::Up);
    pub const UP_DOWN: Self = Self::new(ElectronSpin::Up, NuclearSpin::Down);
    pub const DOWN_DOWN: Self = Self::new(ElectronSpin::Down, NuclearSpin::Down);
    pub const DOWN_UP: Self = Self::new(ElectronSpin::Down, NuclearSpin::Up);

    /// Canonical ordering used for every 4-vector in the crate.
    pub const ALL: [Self; 4] = [Self::UP_UP, Self::UP_DOWN, Self::DOWN_DOWN, Self::DOWN_UP];

    pub const fn new(electron: ElectronSpin, nuclear: NuclearSpin) -> Self {
        Self { electron, nuclear }
    }

    /// Position in [`HyperfineState::ALL`].
    pub fn index(self) -> usize {
        match (self.electron, self.nuclear) {
            (ElectronSpin::Up, NuclearSpin::Up) => 0,
            (ElectronSpin::Up, NuclearSpin::Down) => 1,
            (ElectronSpin::Down, NuclearSpin::Down) => 2,
            (ElectronSpin::Down, NuclearSpin::Up) => 3,
        }
    }

    pub fn is_antiparallel(self) -> bool {
        matches!(
            (self.electron, self.nuclear),
            (ElectronSpin::Up, NuclearSpin::Down) | (ElectronSpin::Down, NuclearSpin::Up)
        )
    }

    pub fn with_electron_flipped(self) -> Self {
        Self::new(self.electron.flipped(), self.nuclear)
    }

    pub fn with_nucleus_flipped(self) -> Self {
        Self::new(self.electron, self.nuclear.flipped())
    }

    pub fn ket(self) -> &'static str {
        ["|↑⇑⟩", "|↑⇓⟩", "|↓⇓⟩", "|↓⇑⟩"][self.index()]
    }

    /// ASCII label used in CSV headers and config files.
    pub fn ascii(self) -> &'static str {
        ["upUp", "upDown", "downDown", "downUp"][self.index()]
    }
}

impl fmt::Display for HyperfineState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.ket())
    }
}

/// Donor spin Hamiltonian parameters and lattice temperature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DonorParams<T> {
    /// Zero-field singlet-triplet splitting, MHz.
    pub hyperfine_a: T,
    pub g_electron: T,
    pub g_nuclear: T,
    /// Magnetic field, mT.
    pub field_b: T,
    /// Kelvin.
    pub temperature: T,
}

impl<T: Real> Default for DonorParams<T> {
    fn default() -> Self {
        Self::phosphorus(c(DEFAULT_FIELD_MT), c(DEFAULT_TEMPERATURE_K))
    }
}

impl<T: Real> DonorParams<T> {
    pub fn phosphorus(field_b: T, temperature: T) -> Self {
        Self {
            hyperfine_a: c(PHOSPHORUS_HYPERFINE_MHZ),
            g_electron: c(DONOR_G_ELECTRON),
            g_nuclear: c(PHOSPHORUS_G_NUCLEAR),
            field_b,
            temperature,
        }
    }

    pub fn with_field(mut self, field_b: T) -> Self {
        self.field_b = field_b;
        self
    }

    pub fn validate(&self) -> Result<(), SpinError> {
        let bad = |name, value: T, reason| SpinError::InvalidParameter {
            name,
            value: value.as_f64(),
            reason,
        };
        if !self.hyperfine_a.is_finite() || self.hyperfine_a <= T::zero() {
            return Err(bad("hyperfine_A", self.hyperfine_a, "must be finite and > 0"));
        }
        if !self.field_b.is_finite() || self.field_b < T::zero() {
            return Err(bad("field_B", self.field_b, "must be finite and >= 0"));
        }
        if !self.temperature.is_finite() || self.temperature <= T::zero() {
            return Err(bad("temperature_T", self.temperature, "must be finite and > 0"));
        }
        if !self.g_electron.is_finite() {
            return Err(bad("g_electron", self.g_electron, "must be finite"));
        }
        if !self.g_nuclear.is_finite() {
            return Err(bad("g_nuclear", self.g_nuclear, "must be finite"));
        }
        Ok(())
    }

    /// Electron Zeeman frequency g_e * muB * B / h, MHz.
    pub fn electron_zeeman(&self) -> T {
        self.g_electron * c(BOHR_MAGNETON_MHZ_PER_T * 1e-3) * self.field_b
    }

    /// Nuclear Zeeman frequency g_n * muN * B / h, MHz.
    pub fn nuclear_zeeman(&self) -> T {
        self.g_nuclear * c(NUCLEAR_MAGNETON_MHZ_PER_T * 1e-3) * self.field_b
    }

    /// k_B T / h, MHz.
    pub fn thermal_energy(&self) -> T {
        self.temperature * c(BOLTZMANN_MHZ_PER_K)
    }
}

/// The four donor eigenenergies at a given field.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DonorEigensystem<T> {
    /// MHz relative to the level centroid, in [`HyperfineState::ALL`] order.
    pub energies: [T; 4],
    /// Admixture angle of the anti-parallel pair, in `[0, pi/4]`.
    pub mixing_angle: T,
}

impl<T: Real> DonorEigensystem<T> {
    pub fn energy(&self, state: HyperfineState) -> T {
        self.energies[state.index()]
    }
}

/// Eigenvalues of `H = w_e S_z - w_n I_z + A S.I` (Breit-Rabi).
pub fn donor_eigensystem<T: Real>(params: &DonorParams<T>) -> Result<DonorEigensystem<T>, SpinError> {
    params.validate()?;
    let a = params.hyperfine_a;
    let we = params.electron_zeeman();
    let wn = params.nuclear_zeeman();
    let half = c::<T>(0.5);
    let quarter = c::<T>(0.25);

    let up_up = half * (we - wn) + quarter * a;
    let down_down = -half * (we - wn) + quarter * a;
    let zeeman_sum = we + wn;
    let root = half * zeeman_sum.hypot(a);
    let up_down = -quarter * a + root;
    let down_up = -quarter * a - root;
    let mixing_angle = half * a.atan2(zeeman_sum);

    Ok(DonorEigensystem {
        energies: [up_up, up_down, down_down, down_up],
        mixing_angle,
    })
}

/// Electron spin of doublets 1..6, lowest energy first.
pub const DOUBLET_ELECTRON_SPIN: [ElectronSpin; 6] = [
    ElectronSpin::Up,
    ElectronSpin::Down,
    ElectronSpin::Up,
    ElectronSpin::Down,
    ElectronSpin::Up,
    ElectronSpin::Down,
];

/// Default spacing of neighbouring doublet midpoints per mT of field.
pub const DEFAULT_DOUBLET_SPACING_MHZ_PER_MT: f64 = 12.0;

/// Bound-exciton side of the transitions: six doublet-center energies that
/// are linear in the field. A line in doublet `k` from donor state `s` sits
/// at `center_k - E_D0(s)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DxConfig<T> {
    /// Doublet-center offsets at zero field, MHz.
    pub offsets: [T; 6],
    /// Doublet-center slopes, MHz/mT.
    pub slopes: [T; 6],
}

impl<T: Real> DxConfig<T> {
    /// Slopes that put the doublet midpoints on an evenly spaced ladder,
    /// alternating electron-up and electron-down doublets.
    pub fn evenly_spaced(spacing_per_mt: T, g_electron: T) -> Self {
        let half_zeeman = c::<T>(0.5 * BOHR_MAGNETON_MHZ_PER_T * 1e-3) * g_electron;
        let mut slopes = [T::zero(); 6];
        for (k, slope) in slopes.iter_mut().enumerate() {
            let rung = T::from_usize_lossy(k) - c(2.5);
            *slope = rung * spacing_per_mt + DOUBLET_ELECTRON_SPIN[k].sign::<T>() * half_zeeman;
        }
        Self {
            offsets: [T::zero(); 6],
            slopes,
        }
    }

    pub fn centers(&self, field_b: T) -> [T; 6] {
        let mut out = [T::zero(); 6];
        for k in 0..6 {
            out[k] = self.offsets[k] + self.slopes[k] * field_b;
        }
        out
    }
}

impl<T: Real> Default for DxConfig<T> {
    fn default() -> Self {
        Self::evenly_spaced(c(DEFAULT_DOUBLET_SPACING_MHZ_PER_MT), c(DONOR_G_ELECTRON))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionLine<T> {
    /// 1..=12 in order of increasing energy.
    pub index: usize,
    pub initial_state: HyperfineState,
    /// 1..=6.
    pub doublet: usize,
    /// MHz from the band center.
    pub energy: T,
    pub strength: T,
}

/// The twelve optical lines, sorted by energy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionCatalog<T> {
    pub lines: Vec<TransitionLine<T>>,
}

impl<T: Real> TransitionCatalog<T> {
    /// Line by its 1-based index.
    pub fn line(&self, index: usize) -> &TransitionLine<T> {
        &self.lines[index - 1]
    }

    pub fn lines_from(&self, state: HyperfineState) -> impl Iterator<Item = &TransitionLine<T>> {
        self.lines.iter().filter(move |l| l.initial_state == state)
    }

    /// Lowest and highest line energy.
    pub fn span(&self) -> (T, T) {
        (self.lines[0].energy, self.lines[self.lines.len() - 1].energy)
    }

    /// The line closest in energy to `energy`.
    pub fn nearest_line(&self, energy: T) -> &TransitionLine<T> {
        self.lines
            .iter()
            .min_by(|a, b| {
                (a.energy - energy)
                    .abs()
                    .partial_cmp(&(b.energy - energy).abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .expect("catalog is never empty")
    }

    /// Smallest energy gap between neighbouring lines.
    pub fn min_gap(&self) -> T {
        self.lines
            .windows(2)
            .map(|w| w[1].energy - w[0].energy)
            .fold(T::infinity(), T::min)
    }
}

/// Builds the 12-line catalog. `strengths` are per-line weights in index
/// order; `None` means uniform unit strength.
pub fn transition_catalog<T: Real>(
    params: &DonorParams<T>,
    dx: &DxConfig<T>,
    strengths: Option<&[T; 12]>,
) -> Result<TransitionCatalog<T>, SpinError> {
    let eig = donor_eigensystem(params)?;
    let centers = dx.centers(params.field_b);
    for (k, v) in dx.offsets.iter().chain(dx.slopes.iter()).enumerate() {
        if !v.is_finite() {
            return Err(SpinError::InvalidParameter {
                name: if k < 6 { "dx_offsets" } else { "dx_slopes" },
                value: v.as_f64(),
                reason: "must be finite",
            });
        }
    }

    let mut lines = Vec::with_capacity(12);
    for (k, &center) in centers.iter().enumerate() {
        let electron = DOUBLET_ELECTRON_SPIN[k];
        let parallel = match electron {
            ElectronSpin::Up => HyperfineState::UP_UP,
            ElectronSpin::Down => HyperfineState::DOWN_DOWN,
        };
        let antiparallel = parallel.with_nucleus_flipped();
        let e_par = center - eig.energy(parallel);
        let e_anti = center - eig.energy(antiparallel);
        if e_anti <= e_par {
            return Err(SpinError::DoubletOrder { doublet: k + 1 });
        }
        for (slot, (state, energy)) in [(parallel, e_par), (antiparallel, e_anti)].into_iter().enumerate() {
            let index = 2 * k + slot + 1;
            let strength = strengths.map_or(T::one(), |s| s[index - 1]);
            if !strength.is_finite() || strength < T::zero() {
                return Err(SpinError::InvalidStrength { index });
            }
            lines.push(TransitionLine {
                index,
                initial_state: state,
                doublet: k + 1,
                energy,
                strength,
            });
        }
    }
    for k in 0..5 {
        if lines[2 * k + 1].energy >= lines[2 * k + 2].energy {
            return Err(SpinError::InterleavedDoublets { lower: k + 1, upper: k + 2 });
        }
    }
    Ok(TransitionCatalog { lines })
}

/// Fractions of the four neutral-donor states plus the ionized fraction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationVector<T> {
    /// In [`HyperfineState::ALL`] order.
    pub d0: [T; 4],
    pub ionized: T,
}

impl<T: Real> PopulationVector<T> {
    pub fn uniform() -> Self {
        Self {
            d0: [c(0.25); 4],
            ionized: T::zero(),
        }
    }

    pub fn from_percent(percent: [T; 4]) -> Result<Self, SpinError> {
        check_percent(&percent)?;
        let total: T = percent.iter().copied().sum();
        Ok(Self {
            d0: percent.map(|p| p / total),
            ionized: T::zero(),
        })
    }

    pub fn get(&self, state: HyperfineState) -> T {
        self.d0[state.index()]
    }

    pub fn total(&self) -> T {
        self.d0.iter().copied().sum::<T>() + self.ionized
    }

    /// Neutral-donor populations renormalized to 100 %.
    pub fn d0_percent(&self) -> [T; 4] {
        let total: T = self.d0.iter().copied().sum();
        if total <= T::zero() {
            return [T::zero(); 4];
        }
        self.d0.map(|p| c::<T>(100.0) * p / total)
    }

    pub fn polarizations(&self) -> Result<Polarization<T>, SpinError> {
        polarizations(&self.d0_percent())
    }
}

/// Boltzmann populations over the four donor eigenstates.
pub fn equilibrium_populations<T: Real>(params: &DonorParams<T>) -> Result<PopulationVector<T>, SpinError> {
    let eig = donor_eigensystem(params)?;
    let kt = params.thermal_energy();
    let e_min = eig.energies.iter().copied().fold(T::infinity(), T::min);
    let weights = eig.energies.map(|e| (-(e - e_min) / kt).exp());
    let z: T = weights.iter().copied().sum();
    Ok(PopulationVector {
        d0: weights.map(|w| w / z),
        ionized: T::zero(),
    })
}

/// Net electron and nuclear polarizations, percent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polarization<T> {
    pub electron: T,
    pub nuclear: T,
}

fn check_percent<T: Real>(percent: &[T; 4]) -> Result<(), SpinError> {
    if percent.iter().any(|p| !p.is_finite() || *p < T::zero()) {
        return Err(SpinError::NegativePopulation);
    }
    let sum: T = percent.iter().copied().sum();
    if (sum - c(100.0)).abs() > c(0.5) {
        return Err(SpinError::Unnormalized { sum: sum.as_f64() });
    }
    Ok(())
}

/// Electron and nuclear polarization of a population vector given in
/// percent over the four donor states (canonical order).
pub fn polarizations<T: Real>(percent: &[T; 4]) -> Result<Polarization<T>, SpinError> {
    check_percent(percent)?;
    let [uu, ud, dd, du] = *percent;
    Ok(Polarization {
        electron: (uu + ud) - (dd + du),
        nuclear: (uu + du) - (ud + dd),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(b: f64) -> DonorParams<f64> {
        DonorParams::default().with_field(b)
    }

    #[test]
    fn zero_field_singlet_triplet_gap() {
        let eig = donor_eigensystem(&params(0.0)).unwrap();
        let gap = eig.energy(HyperfineState::UP_UP) - eig.energy(HyperfineState::DOWN_UP);
        assert!((gap - 117.53).abs() < 117.53 * 1e-12);
        assert_eq!(eig.energy(HyperfineState::UP_UP), eig.energy(HyperfineState::DOWN_DOWN));
        assert_eq!(eig.energy(HyperfineState::UP_DOWN), eig.energy(HyperfineState::UP_UP));
        assert!((eig.mixing_angle - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn energies_are_traceless() {
        for b in [0.0, 1.0, 42.0, 500.0] {
            let eig = donor_eigensystem(&params(b)).unwrap();
            let sum: f64 = eig.energies.iter().sum();
            assert!(sum.abs() < 1e-12 * 117.53 * (1.0 + b), "{b}: {sum}");
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = params(42.0);
        p.hyperfine_a = -1.0;
        assert!(matches!(donor_eigensystem(&p), Err(SpinError::InvalidParameter { name: "hyperfine_A", .. })));
        let mut p = params(-1.0);
        assert!(donor_eigensystem(&p).is_err());
        p.field_b = f64::NAN;
        assert!(donor_eigensystem(&p).is_err());
        let mut p = params(42.0);
        p.temperature = 0.0;
        assert!(donor_eigensystem(&p).is_err());
    }

    #[test]
    fn high_field_mixing_vanishes() {
        let eig = donor_eigensystem(&params(5000.0)).unwrap();
        assert!(eig.mixing_angle < 0.01);
    }

    #[test]
    fn catalog_has_twelve_lines_in_six_doublets() {
        let cat = transition_catalog(&params(42.0), &DxConfig::default(), None).unwrap();
        assert_eq!(cat.lines.len(), 12);
        for (i, l) in cat.lines.iter().enumerate() {
            assert_eq!(l.index, i + 1);
            assert_eq!(l.doublet, i / 2 + 1);
        }
        let expected = [
            (3, HyperfineState::DOWN_DOWN),
            (4, HyperfineState::DOWN_UP),
            (5, HyperfineState::UP_UP),
            (6, HyperfineState::UP_DOWN),
            (7, HyperfineState::DOWN_DOWN),
            (8, HyperfineState::DOWN_UP),
            (9, HyperfineState::UP_UP),
            (10, HyperfineState::UP_DOWN),
        ];
        for (idx, state) in expected {
            assert_eq!(cat.line(idx).initial_state, state, "line {idx}");
        }
        assert_eq!(cat.line(1).initial_state, cat.line(5).initial_state);
        assert_eq!(cat.line(2).initial_state, cat.line(6).initial_state);
        assert_eq!(cat.line(11).initial_state, cat.line(7).initial_state);
        assert_eq!(cat.line(12).initial_state, cat.line(8).initial_state);
    }

    #[test]
    fn zero_field_catalog_is_rejected() {
        let err = transition_catalog(&params(0.0), &DxConfig::default(), None).unwrap_err();
        assert!(matches!(err, SpinError::DoubletOrder { .. } | SpinError::InterleavedDoublets { .. }));
    }

    #[test]
    fn interleaved_centers_are_rejected() {
        let mut dx = DxConfig::<f64>::default();
        dx.offsets[1] = -800.0;
        let err = transition_catalog(&params(42.0), &dx, None).unwrap_err();
        assert!(matches!(err, SpinError::InterleavedDoublets { lower: 1, upper: 2 }));
    }

    #[test]
    fn negative_strength_is_rejected() {
        let mut s = [1.0; 12];
        s[4] = -0.1;
        assert!(matches!(
            transition_catalog(&params(42.0), &DxConfig::default(), Some(&s)),
            Err(SpinError::InvalidStrength { index: 5 })
        ));
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let p = equilibrium_populations(&DonorParams::phosphorus(42.0_f64, 1e12)).unwrap();
        for v in p.d0 {
            assert!((v - 0.25).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_field_singlet_boltzmann_factor() {
        let p = equilibrium_populations(&DonorParams::phosphorus(0.0, 0.01)).unwrap();
        let ratio = p.get(HyperfineState::DOWN_UP) / p.get(HyperfineState::UP_UP);
        let kt = 0.01 * BOLTZMANN_MHZ_PER_K;
        assert!((ratio - (117.53 / kt).exp()).abs() < 1e-12 * ratio);
    }

    #[test]
    fn table_rows_for_lines_six_and_eight() {
        let p = polarizations(&[1.0, 4.0, 84.0, 11.0]).unwrap();
        assert_eq!((p.electron, p.nuclear), (-90.0, -76.0));
        let p = polarizations(&[76.0, 18.0, 2.0, 4.0]).unwrap();
        assert_eq!((p.electron, p.nuclear), (88.0, 60.0));
        let p = polarizations(&[25.0; 4]).unwrap();
        assert_eq!((p.electron, p.nuclear), (0.0, 0.0));
    }

    #[test]
    fn unnormalized_percentages_are_rejected() {
        assert!(matches!(
            polarizations(&[30.0, 30.0, 30.0, 11.0]),
            Err(SpinError::Unnormalized { .. })
        ));
        assert!(polarizations(&[25.2, 25.2, 25.0, 25.0]).is_ok());
    }

    #[test]
    fn labels_round_trip_through_index() {
        for (i, s) in HyperfineState::ALL.iter().enumerate() {
            assert_eq!(s.index(), i);
            assert_eq!(s.with_electron_flipped().with_electron_flipped(), *s);
        }
        assert!(HyperfineState::UP_DOWN.is_antiparallel());
        assert!(!HyperfineState::DOWN_DOWN.is_antiparallel());
    }

    #[test]
    fn single_precision_levels() {
        let eig = donor_eigensystem(&DonorParams::<f32>::default()).unwrap();
        let eig64 = donor_eigensystem(&DonorParams::<f64>::default()).unwrap();
        for i in 0..4 {
            assert!((eig.energies[i] as f64 - eig64.energies[i]).abs() < 1e-3);
        }
    }
}
