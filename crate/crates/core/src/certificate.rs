//! Stable combinations, commutator bounds, the integer exponent quantities,
//! the scalar stabilizability inequalities and the certificate search.
//!
//! Naming: for a stable combination `A_i^p A_j^q`, `j1i` is the first
//! `j → i` path, `i2j` the second `i → j` path, and a trailing `_i`/`_j`
//! names the subsystem whose power enters the commutator. Every inequality
//! has the shape
//!
//! ```text
//! ρ e^{λm} + (Σ c_k M^{e_k} ε_k) e^{λ w} ≤ 1
//! ```
//!
//! where the coefficients `c_k`, exponents `e_k` and window `w` depend on the
//! result kind.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix};
use crate::system::{
    enumerate_cycles, enumerate_paths, family_bound_m, interior_product, DwellBounds, Instance,
    Path, SubsystemFamily, SwitchGraph,
};

/// Largest `k` with `k(k+1)/2 ≤ m`.
pub fn mbar_of(m: u64) -> Result<u64> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be positive".into()));
    }
    let disc = m
        .checked_mul(8)
        .and_then(|v| v.checked_add(1))
        .ok_or_else(|| Error::InvalidInput(format!("m = {m} is too large")))?;
    Ok((disc.isqrt() - 1) / 2)
}

/// A Schur-stable product `A_i^p A_j^q` together with a decay certificate
/// `‖(A_i^p A_j^q)^m‖ = rho < 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct StableCombination {
    pub i: usize,
    pub j: usize,
    pub p: u32,
    pub q: u32,
    pub combo: Matrix,
    pub m: u32,
    pub rho: f64,
    pub mbar: u32,
}

impl StableCombination {
    fn build(family: &SubsystemFamily, i: usize, j: usize, p: u32, q: u32) -> Matrix {
        &family.power(i, p) * &family.power(j, q)
    }

    /// The same combination certified with a different `m`, or `None` when
    /// `‖combo^m‖ ≥ 1`.
    pub fn with_m(&self, m: u32) -> Result<Option<Self>> {
        if m == 0 {
            return Err(Error::InvalidInput("m must be positive".into()));
        }
        let rho = linalg::spectral_norm(&linalg::matrix_power(&self.combo, m)?)?;
        if rho >= 1.0 {
            return Ok(None);
        }
        Ok(Some(Self {
            m,
            rho,
            mbar: mbar_of(u64::from(m))? as u32,
            ..self.clone()
        }))
    }

    pub fn key(&self) -> (usize, usize, u32, u32) {
        (self.i, self.j, self.p, self.q)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub m_max: u32,
    pub max_interior: Option<usize>,
    pub allow_stable: bool,
    pub retry_larger_m: bool,
    /// Working decay rate for the certificate. `None` uses the largest
    /// feasible rate.
    pub lambda: Option<f64>,
}

impl Default for SearchOptions {
    fn default() -> Self {
        Self {
            m_max: 64,
            max_interior: None,
            allow_stable: false,
            retry_larger_m: true,
            lambda: None,
        }
    }
}

/// A Schur combination for which no `m ≤ m_max` brought the norm below one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExhaustedCombination {
    pub i: usize,
    pub j: usize,
    pub p: u32,
    pub q: u32,
    pub spectral_radius: f64,
}

#[derive(Debug, Clone, Default)]
pub struct CombinationScan {
    pub stable: Vec<StableCombination>,
    pub exhausted: Vec<ExhaustedCombination>,
}

/// Every Schur product `A_i^p A_j^q` with `p, q` in the dwell range, each with
/// its smallest certifying `m`, sorted by `rho` then `m`. `i = j` is only
/// considered when `allow_stable` is set.
pub fn find_stable_combinations(
    family: &SubsystemFamily,
    bounds: &DwellBounds,
    options: &SearchOptions,
) -> Result<CombinationScan> {
    let n = family.len();
    let mut scan = CombinationScan::default();
    for i in 1..=n {
        for j in 1..=n {
            if i == j && !options.allow_stable {
                continue;
            }
            for p in bounds.range() {
                for q in bounds.range() {
                    let combo = StableCombination::build(family, i, j, p, q);
                    let radius = linalg::spectral_radius(&combo)?;
                    if radius >= 1.0 - linalg::TOL_SCHUR {
                        continue;
                    }
                    match smallest_m(&combo, options.m_max)? {
                        Some((m, rho)) => scan.stable.push(StableCombination {
                            i,
                            j,
                            p,
                            q,
                            combo,
                            m,
                            rho,
                            mbar: mbar_of(u64::from(m))? as u32,
                        }),
                        None => scan.exhausted.push(ExhaustedCombination {
                            i,
                            j,
                            p,
                            q,
                            spectral_radius: radius,
                        }),
                    }
                }
            }
        }
    }
    scan.stable
        .sort_by(|a, b| a.rho.total_cmp(&b.rho).then(a.m.cmp(&b.m)));
    Ok(scan)
}

fn smallest_m(combo: &Matrix, m_max: u32) -> Result<Option<(u32, f64)>> {
    let mut power = combo.clone();
    for m in 1..=m_max {
        let norm = linalg::spectral_norm(&power)?;
        if norm < 1.0 {
            return Ok(Some((m, norm)));
        }
        power = &power * combo;
    }
    Ok(None)
}

/// `‖A_ℓ^a Π − Π A_ℓ^a‖` with `Π` the interior product of `path` at power `b`.
pub fn commutator_norm(
    family: &SubsystemFamily,
    path: &Path,
    ell: usize,
    a: u32,
    b: u32,
) -> Result<f64> {
    if path.interior().contains(&ell) {
        return Err(Error::InvalidInput(format!(
            "subsystem {ell} lies in the interior of path {path}"
        )));
    }
    if path.length() == 0 {
        return Ok(0.0);
    }
    let pi = interior_product(family, path, b);
    linalg::spectral_norm(&linalg::commutator(&family.power(ell, a), &pi))
}

/// The four paths a certificate is built on. Single-pair results store the
/// same pair twice.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PathQuad {
    pub j_to_i_1: Path,
    pub i_to_j_1: Path,
    pub j_to_i_2: Path,
    pub i_to_j_2: Path,
}

impl PathQuad {
    pub fn new(first: (Path, Path), second: (Path, Path)) -> Self {
        Self {
            j_to_i_1: first.0,
            i_to_j_1: first.1,
            j_to_i_2: second.0,
            i_to_j_2: second.1,
        }
    }

    pub fn single(j_to_i: Path, i_to_j: Path) -> Self {
        Self::new((j_to_i.clone(), i_to_j.clone()), (j_to_i, i_to_j))
    }

    pub fn is_single(&self) -> bool {
        self.j_to_i_1 == self.j_to_i_2 && self.i_to_j_1 == self.i_to_j_2
    }

    pub fn lengths(&self) -> PathLengths {
        PathLengths {
            j1i: self.j_to_i_1.length() as i64,
            i1j: self.i_to_j_1.length() as i64,
            j2i: self.j_to_i_2.length() as i64,
            i2j: self.i_to_j_2.length() as i64,
        }
    }

    pub fn total_length(&self) -> usize {
        [
            &self.j_to_i_1,
            &self.i_to_j_1,
            &self.j_to_i_2,
            &self.i_to_j_2,
        ]
        .iter()
        .map(|p| p.length())
        .sum()
    }

    fn check(&self, i: usize, j: usize) -> Result<()> {
        for p in [&self.j_to_i_1, &self.j_to_i_2] {
            if (p.source(), p.destination()) != (j, i) {
                return Err(Error::InvalidInput(format!(
                    "path {p} does not run {j} -> {i}"
                )));
            }
        }
        for p in [&self.i_to_j_1, &self.i_to_j_2] {
            if (p.source(), p.destination()) != (i, j) {
                return Err(Error::InvalidInput(format!(
                    "path {p} does not run {i} -> {j}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathLengths {
    pub j1i: i64,
    pub i1j: i64,
    pub j2i: i64,
    pub i2j: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CommutatorBounds {
    pub eps_j1i_i: f64,
    pub eps_j2i_i: f64,
    pub eps_j1i_j: f64,
    pub eps_j2i_j: f64,
    pub eps_i1j_i: f64,
    pub eps_i2j_i: f64,
    pub eps_i1j_j: f64,
    pub eps_i2j_j: f64,
}

impl CommutatorBounds {
    pub fn as_array(&self) -> [f64; 8] {
        [
            self.eps_j1i_i,
            self.eps_j2i_i,
            self.eps_j1i_j,
            self.eps_j2i_j,
            self.eps_i1j_i,
            self.eps_i2j_i,
            self.eps_i1j_j,
            self.eps_i2j_j,
        ]
    }

    pub fn from_array(e: [f64; 8]) -> Self {
        Self {
            eps_j1i_i: e[0],
            eps_j2i_i: e[1],
            eps_j1i_j: e[2],
            eps_j2i_j: e[3],
            eps_i1j_i: e[4],
            eps_i2j_i: e[5],
            eps_i1j_j: e[6],
            eps_i2j_j: e[7],
        }
    }
}

/// Tightest commutator bounds: each `ε` is the exact commutator norm.
pub fn commutator_bounds(
    family: &SubsystemFamily,
    combo: &StableCombination,
    paths: &PathQuad,
    delta: u32,
) -> Result<CommutatorBounds> {
    let mut cache = HashMap::new();
    commutator_bounds_cached(family, combo, paths, delta, &mut cache)
}

type CommutatorCache = HashMap<(Path, usize, u32), f64>;

fn commutator_bounds_cached(
    family: &SubsystemFamily,
    combo: &StableCombination,
    paths: &PathQuad,
    delta: u32,
    cache: &mut CommutatorCache,
) -> Result<CommutatorBounds> {
    paths.check(combo.i, combo.j)?;
    let mut eps = |path: &Path, ell: usize, a: u32| -> Result<f64> {
        let key = (path.clone(), ell, a);
        if let Some(&v) = cache.get(&key) {
            return Ok(v);
        }
        let v = commutator_norm(family, path, ell, a, delta)?;
        cache.insert(key, v);
        Ok(v)
    };
    let (i, j, p, q) = (combo.i, combo.j, combo.p, combo.q);
    Ok(CommutatorBounds {
        eps_j1i_i: eps(&paths.j_to_i_1, i, p)?,
        eps_j2i_i: eps(&paths.j_to_i_2, i, p)?,
        eps_j1i_j: eps(&paths.j_to_i_1, j, q)?,
        eps_j2i_j: eps(&paths.j_to_i_2, j, q)?,
        eps_i1j_i: eps(&paths.i_to_j_1, i, p)?,
        eps_i2j_i: eps(&paths.i_to_j_2, i, p)?,
        eps_i1j_j: eps(&paths.i_to_j_1, j, q)?,
        eps_i2j_j: eps(&paths.i_to_j_2, j, q)?,
    })
}

/// Integer product-length exponents of the two-pair inequality. Entries that
/// only appear with a zero coefficient may be negative when `m = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct XiQuantities {
    pub j1i_i: i64,
    pub j2i_i: i64,
    pub j1i_j: i64,
    pub j2i_j: i64,
    pub i1j_i: i64,
    pub i2j_i: i64,
    pub i1j_j: i64,
    pub i2j_j: i64,
    pub window1: i64,
    pub window2: i64,
}

/// The scalar parameters every quantity is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Params {
    pub delta: i64,
    pub p: i64,
    pub q: i64,
    pub m: i64,
    pub mbar: i64,
}

impl Params {
    pub fn new(combo: &StableCombination, delta: u32) -> Self {
        Self {
            delta: delta.into(),
            p: combo.p.into(),
            q: combo.q.into(),
            m: combo.m.into(),
            mbar: combo.mbar.into(),
        }
    }

    fn tail_i(&self) -> i64 {
        self.p * (self.m - 1) + self.q * self.m
    }

    fn tail_j(&self) -> i64 {
        self.p * self.m + self.q * (self.m - 1)
    }
}

pub fn xi_quantities(lengths: PathLengths, params: Params) -> XiQuantities {
    let PathLengths {
        j1i: l1,
        i1j: i1,
        j2i: l2,
        i2j: i2,
    } = lengths;
    let Params {
        delta: d,
        p,
        q,
        m,
        mbar: mb,
    } = params;
    let j1i = l1 * d * (mb - 1) + i1 * d * mb + (l2 + i2) * d * (m - mb);
    let j2i = (l1 + i1) * d * mb + l2 * d * (m - mb - 1) + i2 * d * (m - mb);
    let i1j = l1 * d * mb + i1 * d * (mb - 1) + (l2 + i2) * d * (m - mb);
    let i2j = (l1 + i1) * d * mb + l2 * d * (m - mb) + i2 * d * (m - mb - 1);
    XiQuantities {
        j1i_i: j1i + params.tail_i(),
        j2i_i: j2i + params.tail_i(),
        j1i_j: j1i + params.tail_j(),
        j2i_j: j2i + params.tail_j(),
        i1j_i: i1j + params.tail_i(),
        i2j_i: i2j + params.tail_i(),
        i1j_j: i1j + params.tail_j(),
        i2j_j: i2j + params.tail_j(),
        window1: ((l1 + i1) * d + p + q) * mb,
        window2: ((l2 + i2) * d + p + q) * (m - mb),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Zeta {
    pub ji_i: i64,
    pub ji_j: i64,
    pub ij_i: i64,
    pub ij_j: i64,
    pub jij: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Kappa {
    pub j1i_i: i64,
    pub j2i_i: i64,
    pub j1i_j: i64,
    pub j2i_j: i64,
    pub window1: i64,
    pub window2: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct KappaBar {
    pub ji_i: i64,
    pub ji_j: i64,
    pub jij: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Chi {
    pub i1j_i: i64,
    pub i2j_i: i64,
    pub i1j_j: i64,
    pub i2j_j: i64,
    pub window1: i64,
    pub window2: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ChiBar {
    pub ij_i: i64,
    pub ij_j: i64,
    pub jij: i64,
}

/// Quantities of the single-pair and one-sided inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum ZetaKappaChi {
    Zeta(Zeta),
    Kappa(Kappa),
    KappaBar(KappaBar),
    Chi(Chi),
    ChiBar(ChiBar),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Zeta,
    Kappa,
    KappaBar,
    Chi,
    ChiBar,
}

/// `zeta` and the bar variants read the first pair only; `kappa` reads the
/// two `j → i` lengths and `chi` the two `i → j` lengths.
pub fn zeta_kappa_chi(lengths: PathLengths, params: Params, variant: Variant) -> ZetaKappaChi {
    let Params {
        delta: d,
        p,
        q,
        m,
        mbar: mb,
    } = params;
    let (ti, tj) = (params.tail_i(), params.tail_j());
    let PathLengths {
        j1i: l1,
        i1j: i1,
        j2i: l2,
        i2j: i2,
    } = lengths;
    let (jl, il) = (l1, i1);
    match variant {
        Variant::Zeta => ZetaKappaChi::Zeta(Zeta {
            ji_i: jl * d * (m - 1) + il * d * m + ti,
            ji_j: jl * d * (m - 1) + il * d * m + tj,
            ij_i: jl * d * m + il * d * (m - 1) + ti,
            ij_j: jl * d * m + il * d * (m - 1) + tj,
            jij: ((jl + il) * d + p + q) * m,
        }),
        Variant::Kappa => {
            let j1i = l1 * d * (mb - 1) + l2 * d * (m - mb);
            let j2i = l1 * d * mb + l2 * d * (m - mb - 1);
            ZetaKappaChi::Kappa(Kappa {
                j1i_i: j1i + ti,
                j2i_i: j2i + ti,
                j1i_j: j1i + tj,
                j2i_j: j2i + tj,
                window1: (l1 * d + p + q) * mb,
                window2: (l2 * d + p + q) * (m - mb),
            })
        }
        Variant::KappaBar => ZetaKappaChi::KappaBar(KappaBar {
            ji_i: jl * d * (m - 1) + ti,
            ji_j: jl * d * (m - 1) + tj,
            jij: (jl * d + p + q) * m,
        }),
        Variant::Chi => {
            let i1j = i1 * d * (mb - 1) + i2 * d * (m - mb);
            let i2j = i1 * d * mb + i2 * d * (m - mb - 1);
            ZetaKappaChi::Chi(Chi {
                i1j_i: i1j + ti,
                i2j_i: i2j + ti,
                i1j_j: i1j + tj,
                i2j_j: i2j + tj,
                window1: (i1 * d + p + q) * mb,
                window2: (i2 * d + p + q) * (m - mb),
            })
        }
        Variant::ChiBar => ZetaKappaChi::ChiBar(ChiBar {
            ij_i: il * d * (m - 1) + ti,
            ij_j: il * d * (m - 1) + tj,
            jij: (il * d + p + q) * m,
        }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(untagged)]
pub enum Quantities {
    Xi(XiQuantities),
    Reduced(ZetaKappaChi),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultKind {
    Theorem1,
    Corollary1,
    Corollary2a,
    Corollary2b,
    Corollary3a,
    Corollary3b,
    Corollary4,
}

impl ResultKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Theorem1 => "theorem1",
            Self::Corollary1 => "corollary1",
            Self::Corollary2a => "corollary2a",
            Self::Corollary2b => "corollary2b",
            Self::Corollary3a => "corollary3a",
            Self::Corollary3b => "corollary3b",
            Self::Corollary4 => "corollary4",
        }
    }

    /// Whether the matching signal repeats one sequence instead of the
    /// growing two-sequence schedule.
    pub fn is_periodic(self) -> bool {
        matches!(
            self,
            Self::Corollary1 | Self::Corollary2b | Self::Corollary3b | Self::Corollary4
        )
    }

    /// The exponent quantities this kind is evaluated with.
    pub fn quantities(self, lengths: PathLengths, params: Params) -> Quantities {
        let reduced = |v| Quantities::Reduced(zeta_kappa_chi(lengths, params, v));
        match self {
            Self::Theorem1 => Quantities::Xi(xi_quantities(lengths, params)),
            Self::Corollary1 | Self::Corollary4 => reduced(Variant::Zeta),
            Self::Corollary2a => reduced(Variant::Kappa),
            Self::Corollary2b => reduced(Variant::KappaBar),
            Self::Corollary3a => reduced(Variant::Chi),
            Self::Corollary3b => reduced(Variant::ChiBar),
        }
    }
}

impl std::fmt::Display for ResultKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy)]
struct Term {
    coef: f64,
    exponent: i64,
    eps: f64,
}

/// The `λ`-independent part of an inequality.
#[derive(Debug, Clone)]
struct Condition {
    terms: Vec<Term>,
    window: i64,
}

impl Condition {
    fn new(
        kind: ResultKind,
        m: u32,
        mbar: u32,
        quantities: &Quantities,
        eps: &CommutatorBounds,
    ) -> Result<Self> {
        let (m, mb) = (f64::from(m), f64::from(mbar));
        let c_a = mb * (mb - 1.0) / 2.0;
        let c_b = mb * (mb + 1.0) / 2.0;
        let c_c = (m * (m - 1.0) - mb * (mb - 1.0)) / 2.0;
        let c_d = (m * (m + 1.0) - mb * (mb + 1.0)) / 2.0;
        let s_minus = m * (m - 1.0) / 2.0;
        let s_plus = m * (m + 1.0) / 2.0;
        let t = |coef, exponent, eps| Term {
            coef,
            exponent,
            eps,
        };
        let e = eps;
        let (terms, window) = match (kind, quantities) {
            (ResultKind::Theorem1, Quantities::Xi(x)) => (
                vec![
                    t(c_a, x.j1i_i, e.eps_j1i_i),
                    t(c_b, x.j1i_j, e.eps_j1i_j),
                    t(c_b, x.i1j_i, e.eps_i1j_i),
                    t(c_b, x.i1j_j, e.eps_i1j_j),
                    t(c_c, x.j2i_i, e.eps_j2i_i),
                    t(c_d, x.j2i_j, e.eps_j2i_j),
                    t(c_d, x.i2j_i, e.eps_i2j_i),
                    t(c_d, x.i2j_j, e.eps_i2j_j),
                ],
                x.window1 + x.window2,
            ),
            (
                ResultKind::Corollary1 | ResultKind::Corollary4,
                Quantities::Reduced(ZetaKappaChi::Zeta(z)),
            ) => (
                vec![
                    t(s_minus, z.ji_i, e.eps_j1i_i),
                    t(s_plus, z.ji_j, e.eps_j1i_j),
                    t(s_plus, z.ij_i, e.eps_i1j_i),
                    t(s_plus, z.ij_j, e.eps_i1j_j),
                ],
                z.jij,
            ),
            (ResultKind::Corollary2a, Quantities::Reduced(ZetaKappaChi::Kappa(k))) => (
                vec![
                    t(c_a, k.j1i_i, e.eps_j1i_i),
                    t(c_c, k.j2i_i, e.eps_j2i_i),
                    t(c_b, k.j1i_j, e.eps_j1i_j),
                    t(c_d, k.j2i_j, e.eps_j2i_j),
                ],
                k.window1 + k.window2,
            ),
            (ResultKind::Corollary2b, Quantities::Reduced(ZetaKappaChi::KappaBar(k))) => (
                vec![
                    t(s_minus, k.ji_i, e.eps_j1i_i),
                    t(s_plus, k.ji_j, e.eps_j1i_j),
                ],
                k.jij,
            ),
            (ResultKind::Corollary3a, Quantities::Reduced(ZetaKappaChi::Chi(c))) => (
                vec![
                    t(c_b, c.i1j_i, e.eps_i1j_i),
                    t(c_d, c.i2j_i, e.eps_i2j_i),
                    t(c_b, c.i1j_j, e.eps_i1j_j),
                    t(c_d, c.i2j_j, e.eps_i2j_j),
                ],
                c.window1 + c.window2,
            ),
            (ResultKind::Corollary3b, Quantities::Reduced(ZetaKappaChi::ChiBar(c))) => (
                vec![
                    t(s_plus, c.ij_i, e.eps_i1j_i),
                    t(s_plus, c.ij_j, e.eps_i1j_j),
                ],
                c.jij,
            ),
            _ => {
                return Err(Error::InvalidInput(format!(
                    "quantities do not match result kind {kind}"
                )))
            }
        };
        Ok(Self { terms, window })
    }

    fn weighted_sum(&self, big_m: f64) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.coef != 0.0 && t.eps != 0.0)
            .map(|t| t.coef * big_m.powf(t.exponent as f64) * t.eps)
            .sum()
    }
}

fn lhs_value(rho: f64, m: u32, sum: f64, window: i64, lambda: f64) -> f64 {
    let base = rho * (lambda * f64::from(m)).exp();
    if sum == 0.0 {
        base
    } else {
        base + sum * (lambda * window as f64).exp()
    }
}

/// Left-hand side of the inequality of `kind` at decay rate `lambda`.
pub fn condition_lhs(
    kind: ResultKind,
    combo: &StableCombination,
    quantities: &Quantities,
    eps: &CommutatorBounds,
    big_m: f64,
    lambda: f64,
) -> Result<f64> {
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be finite and >= 0, got {lambda}"
        )));
    }
    let guard = combo.rho * (lambda * f64::from(combo.m)).exp();
    if guard >= 1.0 {
        return Err(Error::Precondition(format!(
            "rho * e^(lambda m) = {guard} is not below 1"
        )));
    }
    let cond = Condition::new(kind, combo.m, combo.mbar, quantities, eps)?;
    Ok(lhs_value(
        combo.rho,
        combo.m,
        cond.weighted_sum(big_m),
        cond.window,
        lambda,
    ))
}

pub const LAMBDA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LambdaBound {
    Feasible(f64),
    Infeasible { lhs_at_zero: f64 },
}

/// Largest `λ > 0` (within [`LAMBDA_TOL`]) with `LHS(λ) ≤ 1` and
/// `ρ e^{λm} < 1`, found by bisection.
pub fn max_lambda(
    kind: ResultKind,
    combo: &StableCombination,
    quantities: &Quantities,
    eps: &CommutatorBounds,
    big_m: f64,
) -> Result<LambdaBound> {
    let cond = Condition::new(kind, combo.m, combo.mbar, quantities, eps)?;
    Ok(bisect(&cond, combo.rho, combo.m, big_m))
}

fn bisect(cond: &Condition, rho: f64, m: u32, big_m: f64) -> LambdaBound {
    let sum = cond.weighted_sum(big_m);
    let lhs = |l: f64| lhs_value(rho, m, sum, cond.window, l);
    let lhs_at_zero = lhs(0.0);
    if lhs_at_zero.is_nan() || lhs_at_zero >= 1.0 {
        return LambdaBound::Infeasible { lhs_at_zero };
    }
    let mf = f64::from(m);
    let ok = |l: f64| rho * (l * mf).exp() < 1.0 && lhs(l) <= 1.0;
    let (mut lo, mut hi) = (
        0.0,
        if rho > 0.0 {
            (1.0 / rho).ln() / mf
        } else {
            700.0 / mf
        },
    );
    while hi - lo > LAMBDA_TOL {
        let mid = 0.5 * (lo + hi);
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    while lo == 0.0 {
        hi *= 0.5;
        if ok(hi) {
            lo = hi;
        }
    }
    LambdaBound::Feasible(lo)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub kind: ResultKind,
    pub combination: StableCombination,
    pub paths: PathQuad,
    pub bounds: CommutatorBounds,
    pub quantities: Quantities,
    /// Working decay rate: the requested rate, or `lambda_max`.
    pub lambda: f64,
    pub lambda_max: f64,
    pub lhs: f64,
    pub big_m: f64,
}

impl Certificate {
    /// Recomputes every scalar from the raw matrices and checks
    /// `LHS ≤ 1`, `ρ e^{λm} < 1` and `λ > 0`. Returns the recomputed LHS.
    pub fn recheck(&self, instance: &Instance) -> Result<f64> {
        let family = &instance.family;
        let c = &self.combination;
        let raw = StableCombination::build(family, c.i, c.j, c.p, c.q);
        let rho = linalg::spectral_norm(&linalg::matrix_power(&raw, c.m)?)?;
        let combo = StableCombination {
            combo: raw,
            rho,
            mbar: mbar_of(u64::from(c.m))? as u32,
            ..c.clone()
        };
        let params = Params::new(&combo, instance.bounds.delta);
        let quantities = self.kind.quantities(self.paths.lengths(), params);
        let eps = commutator_bounds(family, &combo, &self.paths, instance.bounds.delta)?;
        if self.lambda.is_nan() || self.lambda <= 0.0 {
            return Err(Error::Precondition(format!(
                "lambda = {} is not positive",
                self.lambda
            )));
        }
        let big_m = family_bound_m(family);
        let lhs = condition_lhs(self.kind, &combo, &quantities, &eps, big_m, self.lambda)?;
        if lhs > 1.0 {
            return Err(Error::Precondition(format!(
                "recomputed LHS {lhs} exceeds 1"
            )));
        }
        Ok(lhs)
    }

    /// `m̄` of the certified combination.
    pub fn mbar(&self) -> u32 {
        self.combination.mbar
    }
}

/// One evaluated (combination, m, kind, paths) candidate of a failed search.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateRecord {
    pub kind: ResultKind,
    pub i: usize,
    pub j: usize,
    pub p: u32,
    pub q: u32,
    pub m: u32,
    pub rho: f64,
    pub paths: PathQuad,
    pub lhs_at_zero: f64,
    /// LHS at the requested rate, when one was given and admissible.
    pub lhs_at_lambda: Option<f64>,
}

#[derive(Debug, Clone, Default)]
pub struct FailureReport {
    pub stable_combinations: usize,
    pub exhausted: Vec<ExhaustedCombination>,
    pub candidates: Vec<CandidateRecord>,
}

#[derive(Debug, Clone)]
pub enum SearchOutcome {
    Found(Box<Certificate>),
    NotFound(FailureReport),
}

impl SearchOutcome {
    pub fn certificate(&self) -> Option<&Certificate> {
        match self {
            Self::Found(c) => Some(c),
            Self::NotFound(_) => None,
        }
    }
}

/// Walks the stable combinations in order and returns the first certificate.
/// All minimal-`m` candidates are tried before any larger `m`.
pub fn search_certificate(instance: &Instance, options: &SearchOptions) -> Result<SearchOutcome> {
    if let Some(l) = options.lambda {
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must be positive, got {l}"
            )));
        }
    }
    let scan = find_stable_combinations(&instance.family, &instance.bounds, options)?;
    let mut search = Search::new(instance, options);

    for combo in &scan.stable {
        if let Some(cert) = search.try_combination(combo)? {
            return Ok(SearchOutcome::Found(Box::new(cert)));
        }
    }
    if options.retry_larger_m {
        for combo in &scan.stable {
            for m in combo.m + 1..=options.m_max {
                let Some(larger) = combo.with_m(m)? else {
                    continue;
                };
                if let Some(cert) = search.try_combination(&larger)? {
                    return Ok(SearchOutcome::Found(Box::new(cert)));
                }
            }
        }
    }
    Ok(SearchOutcome::NotFound(FailureReport {
        stable_combinations: scan.stable.len(),
        exhausted: scan.exhausted,
        candidates: search.records,
    }))
}

struct Search<'a> {
    instance: &'a Instance,
    options: &'a SearchOptions,
    max_interior: usize,
    big_m: f64,
    candidates: HashMap<(usize, usize), Vec<(ResultKind, PathQuad)>>,
    commutators: HashMap<(usize, usize, u32, u32), CommutatorCache>,
    records: Vec<CandidateRecord>,
}

impl<'a> Search<'a> {
    fn new(instance: &'a Instance, options: &'a SearchOptions) -> Self {
        let n = instance.family.len();
        Self {
            instance,
            options,
            max_interior: options.max_interior.unwrap_or(n.saturating_sub(2)),
            big_m: family_bound_m(&instance.family),
            candidates: HashMap::new(),
            commutators: HashMap::new(),
            records: Vec::new(),
        }
    }

    fn try_combination(&mut self, combo: &StableCombination) -> Result<Option<Certificate>> {
        let (i, j) = (combo.i, combo.j);
        if !self.candidates.contains_key(&(i, j)) {
            let list = candidates(&self.instance.graph, i, j, self.max_interior)?;
            self.candidates.insert((i, j), list);
        }
        let delta = self.instance.bounds.delta;
        let params = Params::new(combo, delta);
        let cache = self.commutators.entry(combo.key()).or_default();
        for (kind, quad) in &self.candidates[&(i, j)] {
            let eps = commutator_bounds_cached(&self.instance.family, combo, quad, delta, cache)?;
            let quantities = kind.quantities(quad.lengths(), params);
            let cond = Condition::new(*kind, combo.m, combo.mbar, &quantities, &eps)?;
            let bound = bisect(&cond, combo.rho, combo.m, self.big_m);
            let sum = cond.weighted_sum(self.big_m);
            let at = |l: f64| lhs_value(combo.rho, combo.m, sum, cond.window, l);
            let lambda_ok = |l: f64| combo.rho * (l * f64::from(combo.m)).exp() < 1.0;
            let requested = self.options.lambda.filter(|&l| lambda_ok(l)).map(at);

            if let LambdaBound::Feasible(lambda_max) = bound {
                let chosen = match self.options.lambda {
                    None => Some(lambda_max),
                    Some(l) => requested.filter(|&v| v <= 1.0).map(|_| l),
                };
                if let Some(lambda) = chosen {
                    return Ok(Some(Certificate {
                        kind: *kind,
                        combination: combo.clone(),
                        paths: quad.clone(),
                        bounds: eps,
                        quantities,
                        lambda,
                        lambda_max,
                        lhs: at(lambda),
                        big_m: self.big_m,
                    }));
                }
            }
            self.records.push(CandidateRecord {
                kind: *kind,
                i,
                j,
                p: combo.p,
                q: combo.q,
                m: combo.m,
                rho: combo.rho,
                paths: quad.clone(),
                lhs_at_zero: at(0.0),
                lhs_at_lambda: requested,
            });
        }
        Ok(None)
    }
}

/// Ordered candidate list for the pair `(i, j)`, chosen by which of the two
/// direct switches exist.
fn candidates(
    graph: &SwitchGraph,
    i: usize,
    j: usize,
    max_interior: usize,
) -> Result<Vec<(ResultKind, PathQuad)>> {
    let forward = i != j && graph.has_edge(i, j);
    let backward = i != j && graph.has_edge(j, i);
    let paths = |u: usize, v: usize| -> Result<Vec<Path>> {
        if u == v {
            enumerate_cycles(graph, u, max_interior)
        } else {
            enumerate_paths(graph, u, v, max_interior)
        }
    };
    let by_length = |mut quads: Vec<PathQuad>| {
        quads.sort_by(|a, b| a.total_length().cmp(&b.total_length()).then(a.cmp(b)));
        quads
    };
    let distinct_pairs = |items: &[(Path, Path)]| -> Vec<PathQuad> {
        let mut out = Vec::new();
        for a in items {
            for b in items {
                if a != b {
                    out.push(PathQuad::new(a.clone(), b.clone()));
                }
            }
        }
        by_length(out)
    };
    let tag = |kind: ResultKind, quads: Vec<PathQuad>| quads.into_iter().map(move |q| (kind, q));

    let mut out = Vec::new();
    if forward && backward {
        out.push((
            ResultKind::Corollary4,
            PathQuad::single(Path::direct(j, i), Path::direct(i, j)),
        ));
    } else if forward {
        let pairs: Vec<_> = paths(j, i)?
            .into_iter()
            .map(|p| (p, Path::direct(i, j)))
            .collect();
        let singles = by_length(
            pairs
                .iter()
                .map(|(a, b)| PathQuad::single(a.clone(), b.clone()))
                .collect(),
        );
        out.extend(tag(ResultKind::Corollary2b, singles));
        out.extend(tag(ResultKind::Corollary2a, distinct_pairs(&pairs)));
    } else if backward {
        let pairs: Vec<_> = paths(i, j)?
            .into_iter()
            .map(|p| (Path::direct(j, i), p))
            .collect();
        let singles = by_length(
            pairs
                .iter()
                .map(|(a, b)| PathQuad::single(a.clone(), b.clone()))
                .collect(),
        );
        out.extend(tag(ResultKind::Corollary3b, singles));
        out.extend(tag(ResultKind::Corollary3a, distinct_pairs(&pairs)));
    } else {
        let ji = paths(j, i)?;
        let ij = paths(i, j)?;
        let pairs: Vec<_> = ji
            .iter()
            .flat_map(|a| ij.iter().map(move |b| (a.clone(), b.clone())))
            .collect();
        out.extend(tag(ResultKind::Theorem1, distinct_pairs(&pairs)));
        let singles = by_length(
            pairs
                .iter()
                .map(|(a, b)| PathQuad::single(a.clone(), b.clone()))
                .collect(),
        );
        out.extend(tag(ResultKind::Corollary1, singles));
    }
    Ok(out)
}
