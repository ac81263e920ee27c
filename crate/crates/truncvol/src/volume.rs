//! Volume estimators: scale the cube to a lattice, count, divide by `u^n`.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use crate::arith::{lcm, IBig, Rational, UBig};
use crate::geometry::{choose_scale, find_intercept, GeometryError, ScaleBasis};
use crate::model::{canonicalize_halfspace, Instance, Kind, ModelError};
use crate::multi::{round_robps, MultiError, MultiOptions};
use crate::robp::{
    binary_expand, count_binary_knapsack_with, count_lattice, round_robp_single_with, LatticeConstraint, RobpError,
    RobpOptions,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Halfspace,
    Convex,
    MultiHalfspace,
    MultiConvex,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Halfspace => "halfspace",
            Mode::Convex => "convex",
            Mode::MultiHalfspace => "multi-halfspace",
            Mode::MultiConvex => "multi-convex",
        }
    }

    /// Mode chosen from the instance's kind and row count.
    pub fn infer(inst: &Instance) -> Mode {
        match (inst.kind(), inst.k()) {
            (Kind::Linear, 1) => Mode::Halfspace,
            (Kind::Convex, 1) => Mode::Convex,
            (Kind::Linear, _) => Mode::MultiHalfspace,
            (Kind::Convex, _) => Mode::MultiConvex,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = VolumeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "halfspace" => Mode::Halfspace,
            "convex" => Mode::Convex,
            "multi-halfspace" => Mode::MultiHalfspace,
            "multi-convex" => Mode::MultiConvex,
            _ => return Err(VolumeError::WrongMode(format!("unknown mode {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VolumeError {
    #[error("epsilon must lie in (0, 9), got {0}")]
    BadEpsilon(Rational),
    #[error("{0}")]
    WrongMode(String),
    #[error("u = {u} exceeds the label cap {cap}")]
    LabelCap { u: UBig, cap: u64 },
    #[error("scale multiplier must be a power of two on the halfspace path, got {0}")]
    BadMultiplier(u64),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Robp(#[from] RobpError),
    #[error(transparent)]
    Multi(#[from] MultiError),
    #[error("thread pool: {0}")]
    Threads(String),
}

impl VolumeError {
    /// Resource caps, as opposed to bad input.
    pub fn is_budget(&self) -> bool {
        matches!(
            self,
            VolumeError::LabelCap { .. }
                | VolumeError::Robp(RobpError::WidthCapExceeded { .. })
                | VolumeError::Multi(MultiError::WidthCapExceeded { .. })
                | VolumeError::Multi(MultiError::Robp(RobpError::WidthCapExceeded { .. }))
        )
    }
}

pub const DEFAULT_MAX_LABELS: u64 = 1 << 22;

#[derive(Debug, Clone)]
pub struct VolumeOptions {
    pub max_intercept_bits: u32,
    pub threads: Option<usize>,
    /// Debug: multiplies the planned `u`.
    pub scale_multiplier: Option<u64>,
    pub eta_override: Option<Rational>,
    pub max_width: Option<usize>,
    /// Largest `u` tabulated on the convex and multi paths.
    pub max_labels: u64,
    /// Keep a text dump of the rounded program(s).
    pub retain_debug: bool,
}

impl Default for VolumeOptions {
    fn default() -> Self {
        VolumeOptions {
            max_intercept_bits: 128,
            threads: None,
            scale_multiplier: None,
            eta_override: None,
            max_width: None,
            max_labels: DEFAULT_MAX_LABELS,
            retain_debug: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolumeStats {
    pub intercept: Option<Rational>,
    pub delta: Rational,
    /// Per-layer rounding factor.
    pub eta: Rational,
    pub widths: Vec<usize>,
    pub source_widths: Vec<usize>,
    pub zprime: UBig,
    pub wall_time: Duration,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VolumeEstimate {
    /// `Z' / u^n`, never clamped.
    pub estimate: Rational,
    pub epsilon: Rational,
    pub u: UBig,
    pub mode: Mode,
    pub stats: VolumeStats,
    pub debug: Option<String>,
}

fn check_epsilon(eps: &Rational) -> Result<Rational, VolumeError> {
    if !eps.is_positive() || eps >= &Rational::from(9u32) {
        return Err(VolumeError::BadEpsilon(eps.clone()));
    }
    Ok(eps / &Rational::from(9u32))
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T, VolumeError> + Send) -> Result<T, VolumeError>
where
    T: Send,
{
    match threads {
        None => f(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| VolumeError::Threads(e.to_string()))?
            .install(f),
    }
}

struct Run {
    mode: Mode,
    epsilon: Rational,
    delta: Rational,
    started: Instant,
}

impl Run {
    fn new(mode: Mode, epsilon: &Rational) -> Result<Self, VolumeError> {
        let delta = check_epsilon(epsilon)?;
        Ok(Run { mode, epsilon: epsilon.clone(), delta, started: Instant::now() })
    }

    fn zero(&self, flag: &str, intercept: Option<Rational>) -> VolumeEstimate {
        VolumeEstimate {
            estimate: Rational::zero(),
            epsilon: self.epsilon.clone(),
            u: UBig::ZERO,
            mode: self.mode,
            stats: VolumeStats {
                intercept,
                delta: self.delta.clone(),
                eta: Rational::zero(),
                widths: Vec::new(),
                source_widths: Vec::new(),
                zprime: UBig::ZERO,
                wall_time: self.started.elapsed(),
                flags: vec![flag.to_string()],
            },
            debug: None,
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn done(
        &self,
        n: usize,
        u: UBig,
        zprime: UBig,
        eta: Rational,
        widths: Vec<usize>,
        source_widths: Vec<usize>,
        intercept: Option<Rational>,
        debug: Option<String>,
    ) -> VolumeEstimate {
        let estimate = Rational::from(zprime.clone()) / Rational::from(u.pow(n));
        VolumeEstimate {
            estimate,
            epsilon: self.epsilon.clone(),
            u,
            mode: self.mode,
            stats: VolumeStats {
                intercept,
                delta: self.delta.clone(),
                eta,
                widths,
                source_widths,
                zprime,
                wall_time: self.started.elapsed(),
                flags: Vec::new(),
            },
            debug,
        }
    }
}

fn scaled(u: UBig, opts: &VolumeOptions) -> UBig {
    match opts.scale_multiplier {
        Some(m) => u * UBig::from(m),
        None => u,
    }
}

fn label_count(u: &UBig, opts: &VolumeOptions) -> Result<u64, VolumeError> {
    match u64::try_from(u.clone()) {
        Ok(v) if v <= opts.max_labels => Ok(v),
        _ => Err(VolumeError::LabelCap { u: u.clone(), cap: opts.max_labels }),
    }
}

fn robp_options(opts: &VolumeOptions) -> RobpOptions {
    RobpOptions { eta_override: opts.eta_override.clone(), max_width: opts.max_width }
}

fn multi_options(opts: &VolumeOptions) -> MultiOptions {
    MultiOptions { eta_override: opts.eta_override.clone(), max_width: opts.max_width, retain_debug: opts.retain_debug }
}

/// `vol([0,1]^n ∩ {a . x <= b})` within a factor `1 + epsilon`.
pub fn volume_halfspace(a: &[IBig], b: &IBig, epsilon: &Rational, opts: &VolumeOptions) -> Result<VolumeEstimate, VolumeError> {
    let run = Run::new(Mode::Halfspace, epsilon)?;
    if a.is_empty() {
        return Err(ModelError::ZeroDimension.into());
    }
    with_threads(opts.threads, || {
        let n = a.len();
        let h = canonicalize_halfspace(a, b);
        let any_weight = h.w.iter().any(|w| w != &UBig::ZERO);
        if h.c < IBig::ZERO {
            return Ok(run.zero("empty", None));
        }
        if h.c == IBig::ZERO && any_weight {
            return Ok(run.zero("measure-zero", None));
        }
        let plan = choose_scale(n, epsilon, ScaleBasis::Halfspace { w: &h.w, c: &h.c })?;
        if let Some(m) = opts.scale_multiplier {
            if !m.is_power_of_two() {
                return Err(VolumeError::BadMultiplier(m));
            }
        }
        let u = scaled(plan.u, opts);
        let cap = UBig::try_from(h.c.clone()).expect("nonnegative") * &u;
        let (w, cap) = binary_expand(&h.w, &cap, &u)?;
        let ropts = robp_options(opts);
        let eta = ropts.eta_override.clone().unwrap_or_else(|| &run.delta / &Rational::from(2 * w.len()));
        let (z, widths, debug) = if opts.retain_debug {
            let (z, robp) = round_robp_single_with(&LatticeConstraint::knapsack(&w, &cap), &run.delta, &ropts)?;
            (z, robp.widths(), Some(robp.dump()))
        } else {
            let (z, widths) = count_binary_knapsack_with(&w, &cap, &run.delta, &ropts)?;
            (z, widths, None)
        };
        let z = UBig::try_from(z.floor()).expect("count");
        Ok(run.done(n, u, z, eta, widths, Vec::new(), None, debug))
    })
}

fn require_k(inst: &Instance, k1: bool) -> Result<(), VolumeError> {
    if k1 && inst.k() != 1 {
        return Err(VolumeError::WrongMode(format!("single-constraint mode given {} constraints", inst.k())));
    }
    Ok(())
}

fn has_negative_linear(inst: &Instance) -> bool {
    inst.constraints()
        .iter()
        .flat_map(|c| &c.fns)
        .any(|f| f.linear_coefficient().is_some_and(|a| a.is_negative()))
}

fn convex_like(inst: &Instance, epsilon: &Rational, opts: &VolumeOptions, mode: Mode) -> Result<VolumeEstimate, VolumeError> {
    let run = Run::new(mode, epsilon)?;
    require_k(inst, mode == Mode::Convex)?;
    if has_negative_linear(inst) {
        return Err(VolumeError::WrongMode("negative linear coefficients need the halfspace path".into()));
    }
    let inst = inst.clone().validate()?;
    with_threads(opts.threads, || {
        if inst.is_empty() {
            return Ok(run.zero("empty", None));
        }
        let norm = inst.normalize_offsets();
        let ic = match find_intercept(&norm, opts.max_intercept_bits) {
            Ok(ic) => ic,
            Err(GeometryError::IntercptBelowBudget { max_bits }) => {
                return Ok(run.zero(&format!("volume < 2^-{max_bits}"), None));
            }
            Err(e) => return Err(e.into()),
        };
        let plan = choose_scale(inst.n(), epsilon, ScaleBasis::Intercept(&ic))?;
        let u = scaled(plan.u, opts);
        let labels = label_count(&u, opts)?;
        let lcs = crate::multi::tabulate(&norm, labels);
        let intercept = Some(ic.ell_prime.clone());
        if mode == Mode::Convex {
            single(&run, inst.n(), u, &lcs[0], opts, intercept)
        } else {
            multi(&run, inst.n(), u, &lcs, opts, intercept)
        }
    })
}

fn single(
    run: &Run,
    n: usize,
    u: UBig,
    lc: &LatticeConstraint,
    opts: &VolumeOptions,
    intercept: Option<Rational>,
) -> Result<VolumeEstimate, VolumeError> {
    let ropts = robp_options(opts);
    let eta = ropts.eta_override.clone().unwrap_or_else(|| &run.delta / &Rational::from(2 * n));
    let (z, widths, debug) = if opts.retain_debug {
        let (z, robp) = round_robp_single_with(lc, &run.delta, &ropts)?;
        (z, robp.widths(), Some(robp.dump()))
    } else {
        let (z, widths) = count_lattice(lc, &run.delta, &ropts)?;
        (z, widths, None)
    };
    let z = UBig::try_from(z.floor()).expect("count");
    Ok(run.done(n, u, z, eta, widths, Vec::new(), intercept, debug))
}

fn multi(
    run: &Run,
    n: usize,
    u: UBig,
    lcs: &[LatticeConstraint],
    opts: &VolumeOptions,
    intercept: Option<Rational>,
) -> Result<VolumeEstimate, VolumeError> {
    let out = match round_robps(lcs, &run.delta, &multi_options(opts)) {
        Ok(out) => out,
        Err(MultiError::ZeroBound { .. }) => return Ok(run.zero("measure-zero", intercept)),
        Err(e) => return Err(e.into()),
    };
    let mut est = run.done(n, u, out.zprime, out.step_eta, out.product_widths, out.source_widths, intercept, out.dump);
    if out.active_rows.is_empty() {
        est.stats.flags.push("unconstrained".into());
    }
    Ok(est)
}

/// Single separable convex constraint.
pub fn volume_convex(inst: &Instance, epsilon: &Rational, opts: &VolumeOptions) -> Result<VolumeEstimate, VolumeError> {
    convex_like(inst, epsilon, opts, Mode::Convex)
}

/// Several separable convex constraints.
pub fn volume_multi_convex(inst: &Instance, epsilon: &Rational, opts: &VolumeOptions) -> Result<VolumeEstimate, VolumeError> {
    convex_like(inst, epsilon, opts, Mode::MultiConvex)
}

/// `A x <= b` with `A >= 0` entrywise.
pub fn volume_multi_halfspace(
    rows: &[Vec<IBig>],
    b: &[IBig],
    epsilon: &Rational,
    opts: &VolumeOptions,
) -> Result<VolumeEstimate, VolumeError> {
    let run = Run::new(Mode::MultiHalfspace, epsilon)?;
    let n = rows.first().map_or(0, |r| r.len());
    if rows.is_empty() {
        return Err(ModelError::NoConstraints.into());
    }
    if n == 0 {
        return Err(ModelError::ZeroDimension.into());
    }
    if rows.len() != b.len() {
        return Err(ModelError::DimensionMismatch { expected: rows.len(), found: b.len() }.into());
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(ModelError::DimensionMismatch { expected: n, found: r.len() }.into());
        }
        if let Some(j) = r.iter().position(|a| a < &IBig::ZERO) {
            return Err(ModelError::NegativeCoefficient { constraint: i, var: j }.into());
        }
    }
    with_threads(opts.threads, || {
        if b.iter().any(|bi| bi < &IBig::ZERO) {
            return Ok(run.zero("empty", None));
        }
        let zero_slab = rows.iter().zip(b).any(|(r, bi)| bi == &IBig::ZERO && r.iter().any(|a| a != &IBig::ZERO));
        if zero_slab {
            return Ok(run.zero("measure-zero", None));
        }
        let rrows: Vec<Vec<Rational>> = rows.iter().map(|r| r.iter().cloned().map(Rational::from).collect()).collect();
        let rb: Vec<Rational> = b.iter().cloned().map(Rational::from).collect();
        let plan = choose_scale(n, epsilon, ScaleBasis::MultiLinear { rows: &rrows, bounds: &rb })?;
        let u = scaled(plan.u, opts);
        let labels = label_count(&u, opts)?;
        // a . x <= b u in lattice units
        let ur = Rational::from(u.clone());
        let lcs: Vec<LatticeConstraint> = rrows
            .iter()
            .zip(&rb)
            .map(|(r, bi)| LatticeConstraint {
                tables: r.iter().map(|a| (0..labels).map(|d| a * &Rational::from(d)).collect()).collect(),
                bound: bi * &ur,
            })
            .collect();
        multi(&run, n, u, &lcs, opts, None)
    })
}

/// Integer form of a rational row `a . x <= b`.
pub fn integer_row(a: &[Rational], b: &Rational) -> (Vec<IBig>, IBig) {
    let mut d = b.denom().clone();
    for x in a {
        d = lcm(&d, x.denom());
    }
    let dr = Rational::from(d);
    let scale = |x: &Rational| (x * &dr).floor();
    (a.iter().map(scale).collect(), scale(b))
}

/// Dispatches on `mode`, or on the instance's shape when `None`.
pub fn estimate(inst: &Instance, mode: Option<Mode>, epsilon: &Rational, opts: &VolumeOptions) -> Result<VolumeEstimate, VolumeError> {
    let mode = mode.unwrap_or_else(|| Mode::infer(inst));
    match mode {
        Mode::Halfspace | Mode::MultiHalfspace => {
            let rows = inst
                .linear_rows()
                .ok_or_else(|| VolumeError::WrongMode(format!("{mode} needs a linear instance")))?;
            let ints: Vec<(Vec<IBig>, IBig)> =
                rows.iter().zip(inst.constraints()).map(|(r, c)| integer_row(r, &c.bound)).collect();
            if mode == Mode::Halfspace {
                require_k(inst, true)?;
                volume_halfspace(&ints[0].0, &ints[0].1, epsilon, opts)
            } else {
                let a: Vec<Vec<IBig>> = ints.iter().map(|r| r.0.clone()).collect();
                let b: Vec<IBig> = ints.iter().map(|r| r.1.clone()).collect();
                volume_multi_halfspace(&a, &b, epsilon, opts)
            }
        }
        Mode::Convex => volume_convex(inst, epsilon, opts),
        Mode::MultiConvex => volume_multi_convex(inst, epsilon, opts),
    }
}
