//! Grid functions and the eps-weighted function-space structure.
//!
//! A [`Field`] is one real value per grid node, the discrete stand-in for an
//! element of the Hilbert space `H_eps`. The inner products carry the
//! singular-perturbation scaling `eps^{-n}`:
//!
//! * plain form: `<u,v>_eps = eps^{-n} sum [eps^2 <grad u, grad v> + u v] w`,
//! * coefficient form: `L_eps(u,v) = eps^{-n} sum [eps^2 <grad u, grad v> + c(x) u v] w`,
//! * Lebesgue norms: `|u|_{q,eps} = (eps^{-n} sum |u|^q w)^{1/q}`.
//!
//! The gradient term is defined through the discrete Laplacian pairing
//! `-sum v (lap u) w`, which on periodic grids equals the forward-difference
//! Dirichlet sum exactly (summation by parts). Defining it this way makes
//! self-adjointness of the forms an identity rather than an approximation, so
//! the structural invariants can be asserted at round-off level.

use std::ops::{Add, Index, Mul, Neg, Sub};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::manifold::TorusManifold;

/// Problem parameters derived from the base dimension `n`, the fiber
/// dimension `m` and the perturbation scale `eps`:
///
/// * `a = 4(n+m-1)/(n+m-2)`,
/// * `p = 2(n+m)/(n+m-2)`,
/// * coefficient `c = 1 + s_g eps^2 / a`, constant on flat tori.
///
/// The curvature `s_g` is kept as a constant hook so a constant-curvature
/// extension needs no interface change; construction fails unless the
/// coefficient stays positive.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EpsParams {
    eps: f64,
    base_dim: usize,
    fiber_dim: usize,
    a: f64,
    p: f64,
    curvature: f64,
    coeff: f64,
    c_lo: f64,
    c_hi: f64,
}

impl EpsParams {
    /// Flat-torus parameters (`s_g = 0`).
    pub fn new(base_dim: usize, fiber_dim: usize, eps: f64) -> Result<Self> {
        Self::curved(base_dim, fiber_dim, eps, 0.0)
    }

    /// Constant-curvature hook: same exponents, coefficient
    /// `c = 1 + s_g eps^2 / a`.
    pub fn curved(base_dim: usize, fiber_dim: usize, eps: f64, curvature: f64) -> Result<Self> {
        if !(eps.is_finite() && eps > 0.0) {
            return Err(Error::InvalidParams(format!("eps must be positive, got {eps}")));
        }
        if base_dim == 0 || base_dim > 3 {
            return Err(Error::InvalidParams(format!(
                "base dimension must be 1, 2 or 3, got {base_dim}"
            )));
        }
        if fiber_dim == 0 {
            return Err(Error::InvalidParams("fiber dimension must be >= 1".into()));
        }
        let total = base_dim + fiber_dim;
        if total < 3 {
            return Err(Error::InvalidParams(
                "n + m must be at least 3 so that p > 2".into(),
            ));
        }
        let a = 4.0 * (total as f64 - 1.0) / (total as f64 - 2.0);
        let p = 2.0 * total as f64 / (total as f64 - 2.0);
        let coeff = 1.0 + curvature * eps * eps / a;
        if coeff <= 0.0 {
            return Err(Error::CoercivityViolated { coeff });
        }
        let c_lo = coeff.min(1.0).sqrt();
        let c_hi = coeff.max(1.0).sqrt();
        Ok(EpsParams {
            eps,
            base_dim,
            fiber_dim,
            a,
            p,
            curvature,
            coeff,
            c_lo,
            c_hi,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn base_dim(&self) -> usize {
        self.base_dim
    }

    pub fn fiber_dim(&self) -> usize {
        self.fiber_dim
    }

    /// `a = 4(n+m-1)/(n+m-2)`.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Subcritical exponent `p = 2(n+m)/(n+m-2)`.
    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// The constant coefficient `c = 1 + s_g eps^2 / a`.
    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    /// Lower coercivity constant `sqrt(min(1, c))`.
    pub fn c_lo(&self) -> f64 {
        self.c_lo
    }

    /// Upper coercivity constant `sqrt(max(1, c))`.
    pub fn c_hi(&self) -> f64 {
        self.c_hi
    }

    /// Quadrature prefactor `eps^{-n} w` for sums over grid nodes.
    pub fn measure_scale(&self, manifold: &TorusManifold) -> f64 {
        debug_assert_eq!(self.base_dim, manifold.dim());
        self.eps.powi(-(self.base_dim as i32)) * manifold.quad_weight()
    }
}

/// Which zero-order coefficient the bilinear form carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BilinearMode {
    /// Mass term with coefficient 1: the plain `H_eps` inner product.
    Plain,
    /// Mass term with the coefficient `c(x)`: the form `L_eps`.
    Curved,
}

/// A real-valued function on the grid nodes of a torus.
#[derive(Clone, Debug)]
pub struct Field {
    manifold: Arc<TorusManifold>,
    values: Vec<f64>,
}

impl Field {
    pub fn zeros(manifold: Arc<TorusManifold>) -> Self {
        let n = manifold.node_count();
        Field {
            manifold,
            values: vec![0.0; n],
        }
    }

    pub fn constant(manifold: Arc<TorusManifold>, value: f64) -> Self {
        let n = manifold.node_count();
        Field {
            manifold,
            values: vec![value; n],
        }
    }

    /// Builds a field by evaluating `f` at every node's coordinates.
    pub fn from_fn(manifold: Arc<TorusManifold>, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let values = (0..manifold.node_count())
            .map(|idx| f(manifold.node_point(idx).coords()))
            .collect();
        Field { manifold, values }
    }

    /// Wraps raw values; they must match the node count and be finite.
    pub fn from_values(manifold: Arc<TorusManifold>, values: Vec<f64>) -> Result<Self> {
        if values.len() != manifold.node_count() {
            return Err(Error::DimensionMismatch {
                expected: manifold.node_count(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams("field values must be finite".into()));
        }
        Ok(Field { manifold, values })
    }

    pub(crate) fn from_parts(manifold: Arc<TorusManifold>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), manifold.node_count());
        Field { manifold, values }
    }

    pub fn manifold(&self) -> &Arc<TorusManifold> {
        &self.manifold
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub(crate) fn check_same_manifold(&self, other: &Field) -> Result<()> {
        if Arc::ptr_eq(&self.manifold, &other.manifold) || *self.manifold == *other.manifold {
            Ok(())
        } else {
            Err(Error::ManifoldMismatch)
        }
    }

    /// `self + alpha * other`, in place.
    pub fn axpy(&mut self, alpha: f64, other: &Field) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        for a in &mut self.values {
            *a *= alpha;
        }
    }

    /// Signed power `sign(u) |u|^gamma`, the nonlinearity with `gamma = p-1`.
    pub fn odd_power(&self, gamma: f64) -> Field {
        let values = self
            .values
            .iter()
            .map(|&v| v.signum() * v.abs().powf(gamma))
            .collect();
        Field {
            manifold: self.manifold.clone(),
            values,
        }
    }

    /// Pointwise power of the absolute value.
    pub fn abs_power(&self, gamma: f64) -> Field {
        let values = self.values.iter().map(|&v| v.abs().powf(gamma)).collect();
        Field {
            manifold: self.manifold.clone(),
            values,
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }
}

impl Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

impl Add for &Field {
    type Output = Field;
    fn add(self, rhs: &Field) -> Field {
        debug_assert_eq!(self.len(), rhs.len());
        let values = self
            .values
            .iter()
            .zip(&rhs.values)
            .map(|(a, b)| a + b)
            .collect();
        Field::from_parts(self.manifold.clone(), values)
    }
}

impl Sub for &Field {
    type Output = Field;
    fn sub(self, rhs: &Field) -> Field {
        debug_assert_eq!(self.len(), rhs.len());
        let values = self
            .values
            .iter()
            .zip(&rhs.values)
            .map(|(a, b)| a - b)
            .collect();
        Field::from_parts(self.manifold.clone(), values)
    }
}

impl Mul<f64> for &Field {
    type Output = Field;
    fn mul(self, rhs: f64) -> Field {
        let values = self.values.iter().map(|a| a * rhs).collect();
        Field::from_parts(self.manifold.clone(), values)
    }
}

impl Neg for &Field {
    type Output = Field;
    fn neg(self) -> Field {
        let values = self.values.iter().map(|a| -a).collect();
        Field::from_parts(self.manifold.clone(), values)
    }
}

/// Compensated (Neumaier) summation: keeps the accumulation error near one
/// ulp of the total instead of sqrt(N) ulps. The flow's backtracking compares
/// energies whose descent increments sit at the grad^2 scale, which plain
/// summation noise would swamp on large grids.
pub(crate) struct KahanSum {
    sum: f64,
    compensation: f64,
}

impl KahanSum {
    pub(crate) fn new() -> Self {
        KahanSum {
            sum: 0.0,
            compensation: 0.0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// Standard second-order periodic central-difference Laplacian,
/// `(u_{j+1} - 2 u_j + u_{j-1}) / h^2` summed over axes.
pub fn laplace(u: &Field) -> Field {
    let m = u.manifold();
    let vals = u.values();
    let mut out = vec![0.0; vals.len()];
    for (axis, table) in m.neighbor_table().iter().enumerate() {
        let h = m.spacings()[axis];
        let inv_h2 = 1.0 / (h * h);
        for (i, o) in out.iter_mut().enumerate() {
            let [prev, next] = table[i];
            *o += (vals[prev as usize] - 2.0 * vals[i] + vals[next as usize]) * inv_h2;
        }
    }
    Field::from_parts(m.clone(), out)
}

/// The eps-weighted bilinear form
/// `eps^{-n} sum [eps^2 <grad u, grad v> + kappa u v] w` with `kappa = 1`
/// (plain) or `kappa = c(x)` (curved). The gradient term goes through the
/// discrete Laplacian pairing, so the form equals the duality pairing of `v`
/// against the discrete operator exactly.
pub fn bilinear(u: &Field, v: &Field, params: &EpsParams, mode: BilinearMode) -> Result<f64> {
    u.check_same_manifold(v)?;
    Ok(bilinear_unchecked(u, v, params, mode))
}

pub(crate) fn bilinear_unchecked(
    u: &Field,
    v: &Field,
    params: &EpsParams,
    mode: BilinearMode,
) -> f64 {
    let kappa = match mode {
        BilinearMode::Plain => 1.0,
        BilinearMode::Curved => params.coeff(),
    };
    let lap = laplace(u);
    let mut grad = KahanSum::new();
    let mut mass = KahanSum::new();
    for i in 0..u.len() {
        grad.add(-lap[i] * v[i]);
        mass.add(u[i] * v[i]);
    }
    let eps2 = params.eps() * params.eps();
    params.measure_scale(u.manifold()) * (eps2 * grad.total() + kappa * mass.total())
}

/// `L_eps(u, u)`, the squared coefficient norm.
pub fn l_energy(u: &Field, params: &EpsParams) -> f64 {
    bilinear_unchecked(u, u, params, BilinearMode::Curved)
}

/// Plain eps-norm `<u,u>_eps^{1/2}`.
pub fn norm_eps(u: &Field, params: &EpsParams) -> f64 {
    bilinear_unchecked(u, u, params, BilinearMode::Plain).sqrt()
}

/// Lebesgue norm `|u|_{q,eps} = (eps^{-n} sum |u|^q w)^{1/q}` for `q >= 1`.
pub fn lp_norm(u: &Field, q: f64, params: &EpsParams) -> f64 {
    assert!(q >= 1.0, "lp_norm needs q >= 1, got {q}");
    (lp_power(u, q, params)).powf(1.0 / q)
}

/// `eps^{-n} sum |u|^p w`, the p-th power of the Lebesgue norm.
pub fn lp_power(u: &Field, p: f64, params: &EpsParams) -> f64 {
    let mut sum = KahanSum::new();
    for &v in u.values() {
        sum.add(v.abs().powf(p));
    }
    params.measure_scale(u.manifold()) * sum.total()
}

/// Sign decomposition `u = u_plus - u_minus` with the cone-distance
/// surrogates.
#[derive(Clone, Debug)]
pub struct SignSplit {
    /// `max(u, 0)`.
    pub plus: Field,
    /// `max(-u, 0)`.
    pub minus: Field,
    /// `L_eps(u_minus, u_minus)^{1/2}`, an upper bound for the distance from
    /// `u` to the cone of nonnegative fields (`u - u_plus = -u_minus`).
    pub gap_plus: f64,
    /// Symmetric bound for the distance to the nonpositive cone.
    pub gap_minus: f64,
}

/// Splits a field into its positive and negative parts and computes both cone
/// gaps.
pub fn sign_split(u: &Field, params: &EpsParams) -> SignSplit {
    let plus_vals: Vec<f64> = u.values().iter().map(|&v| v.max(0.0)).collect();
    let minus_vals: Vec<f64> = u.values().iter().map(|&v| (-v).max(0.0)).collect();
    let plus = Field::from_parts(u.manifold().clone(), plus_vals);
    let minus = Field::from_parts(u.manifold().clone(), minus_vals);
    let gap_plus = l_energy(&minus, params).max(0.0).sqrt();
    let gap_minus = l_energy(&plus, params).max(0.0).sqrt();
    SignSplit {
        plus,
        minus,
        gap_plus,
        gap_minus,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::TorusManifold;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    const TAU: f64 = 2.0 * PI;

    fn random_field(m: &Arc<TorusManifold>, rng: &mut ChaCha8Rng) -> Field {
        let values = (0..m.node_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        Field::from_parts(m.clone(), values)
    }

    /// Forward-difference Dirichlet sum; equals the Laplacian pairing exactly
    /// on periodic grids (summation by parts).
    fn dirichlet_sum(u: &Field) -> f64 {
        let m = u.manifold();
        let mut total = 0.0;
        for (axis, table) in m.neighbor_table().iter().enumerate() {
            let h = m.spacings()[axis];
            for i in 0..u.len() {
                let [_, next] = table[i];
                let diff = (u[next as usize] - u[i]) / h;
                total += diff * diff;
            }
        }
        total
    }

    #[test]
    fn params_exponents() {
        // n = 1, m = 3: a = 6, p = 4.
        let p = EpsParams::new(1, 3, 0.1).unwrap();
        assert_relative_eq!(p.a(), 6.0);
        assert_relative_eq!(p.p(), 4.0);
        assert_eq!(p.coeff(), 1.0);
        assert_eq!((p.c_lo(), p.c_hi()), (1.0, 1.0));
        // n = 3, m = 1: p = 4 as well; n = 2, m = 2: p = 4.
        assert_relative_eq!(EpsParams::new(3, 1, 0.1).unwrap().p(), 4.0);
        assert_relative_eq!(EpsParams::new(2, 3, 0.1).unwrap().p(), 10.0 / 3.0);
    }

    #[test]
    fn params_reject_bad_input() {
        assert!(EpsParams::new(1, 1, 0.1).is_err()); // p would blow up
        assert!(EpsParams::new(1, 3, 0.0).is_err());
        assert!(EpsParams::new(0, 3, 0.1).is_err());
        // Strongly negative curvature kills positivity of the coefficient.
        let err = EpsParams::curved(1, 3, 10.0, -1.0).unwrap_err();
        assert!(matches!(err, crate::error::Error::CoercivityViolated { .. }));
    }

    #[test]
    fn bilinear_cosine_matches_discrete_symbol() {
        let n = 2048;
        let m = TorusManifold::circle(TAU, n).unwrap();
        let params = EpsParams::new(1, 3, 1.0).unwrap();
        let u = Field::from_fn(m.clone(), |x| x[0].cos());
        let h = m.spacings()[0];
        let symbol = 4.0 * (h / 2.0).sin().powi(2) / (h * h);
        let got = bilinear(&u, &u, &params, BilinearMode::Plain).unwrap();
        // Exact value of the discrete form, and 2 pi within O(h^2).
        assert_relative_eq!(got, symbol * PI + PI, max_relative = 1e-12);
        assert_relative_eq!(got, TAU, max_relative = 1e-5);
    }

    #[test]
    fn bilinear_constant_field() {
        let m = TorusManifold::circle(TAU, 512).unwrap();
        let params = EpsParams::new(1, 3, 1.0).unwrap();
        let one = Field::constant(m, 1.0);
        let got = bilinear(&one, &one, &params, BilinearMode::Plain).unwrap();
        assert_relative_eq!(got, TAU, max_relative = 1e-14);
    }

    #[test]
    fn bilinear_symmetric_and_bilinear() {
        let m = TorusManifold::new(vec![TAU, 3.0], vec![16, 16]).unwrap();
        let params = EpsParams::new(2, 2, 0.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..20 {
            let u = random_field(&m, &mut rng);
            let v = random_field(&m, &mut rng);
            let w = random_field(&m, &mut rng);
            let uv = bilinear(&u, &v, &params, BilinearMode::Curved).unwrap();
            let vu = bilinear(&v, &u, &params, BilinearMode::Curved).unwrap();
            assert_relative_eq!(uv, vu, max_relative = 1e-12, epsilon = 1e-12);
            // Linearity in the first slot: (a u + w, v) = a (u, v) + (w, v).
            let a = 0.7;
            let mut s = &u * a;
            s.axpy(1.0, &w);
            let lhs = bilinear(&s, &v, &params, BilinearMode::Curved).unwrap();
            let wv = bilinear(&w, &v, &params, BilinearMode::Curved).unwrap();
            assert_relative_eq!(lhs, a * uv + wv, max_relative = 1e-11, epsilon = 1e-12);
        }
    }

    #[test]
    fn bilinear_rejects_mismatched_manifolds() {
        let m1 = TorusManifold::circle(TAU, 64).unwrap();
        let m2 = TorusManifold::circle(TAU, 128).unwrap();
        let params = EpsParams::new(1, 3, 1.0).unwrap();
        let u = Field::zeros(m1);
        let v = Field::zeros(m2);
        assert!(bilinear(&u, &v, &params, BilinearMode::Plain).is_err());
    }

    #[test]
    fn gradient_pairing_equals_dirichlet_sum() {
        // Summation by parts is an identity on periodic grids, so the two
        // routes agree to round-off even for kinked fields like cos^-.
        let m = TorusManifold::circle(TAU, 256).unwrap();
        let params = EpsParams::new(1, 3, 1.0).unwrap();
        let u = Field::from_fn(m.clone(), |x| x[0].cos());
        let split = sign_split(&u, &params);
        for w in [&u, &split.minus] {
            let lap = laplace(w);
            let pairing: f64 = (0..w.len()).map(|i| -lap[i] * w[i]).sum();
            assert_relative_eq!(pairing, dirichlet_sum(w), max_relative = 1e-12);
        }
    }

    #[test]
    fn lp_norm_constant_and_zero() {
        let m = TorusManifold::circle(TAU, 512).unwrap();
        let params = EpsParams::new(1, 3, 1.0).unwrap();
        let one = Field::constant(m.clone(), 1.0);
        assert_relative_eq!(lp_norm(&one, 4.0, &params), TAU.powf(0.25), max_relative = 1e-14);
        let zero = Field::zeros(m);
        assert_eq!(lp_norm(&zero, 4.0, &params), 0.0);
    }

    #[test]
    fn lp_norm_is_homogeneous() {
        let m = TorusManifold::circle(TAU, 128).unwrap();
        let params = EpsParams::new(1, 3, 0.3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let u = random_field(&m, &mut rng);
            let lam = rng.random_range(-3.0..3.0);
            let scaled = &u * lam;
            assert_relative_eq!(
                lp_norm(&scaled, 3.5, &params),
                lam.abs() * lp_norm(&u, 3.5, &params),
                max_relative = 1e-12,
                epsilon = 1e-300
            );
        }
    }

    #[test]
    fn sign_split_reconstructs_and_flags_cone_members() {
        let m = TorusManifold::circle(TAU, 256).unwrap();
        let params = EpsParams::new(1, 3, 0.5).unwrap();
        let u = Field::from_fn(m.clone(), |x| x[0].cos());
        let split = sign_split(&u, &params);
        for i in 0..u.len() {
            assert_eq!(split.plus[i] - split.minus[i], u[i]);
            assert!(split.plus[i] >= 0.0 && split.minus[i] >= 0.0);
        }
        // Odd under half-period translation: both gaps agree.
        assert_relative_eq!(split.gap_plus, split.gap_minus, max_relative = 1e-12);

        let nonneg = Field::from_fn(m.clone(), |x| x[0].cos() + 1.5);
        let s = sign_split(&nonneg, &params);
        assert_eq!(s.gap_plus, 0.0);
        assert!(s.minus.values().iter().all(|&v| v == 0.0));

        // gap_plus = 0 iff u >= 0 at every node: the other direction.
        let dipped = Field::from_fn(m, |x| x[0].cos() - 0.999);
        let s2 = sign_split(&dipped, &params);
        assert!(s2.gap_plus > 0.0);
    }

    #[test]
    fn coercivity_sandwich() {
        let m = TorusManifold::circle(TAU, 128).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        // Flat: the two forms coincide exactly.
        let flat = EpsParams::new(1, 3, 0.4).unwrap();
        for _ in 0..10 {
            let u = random_field(&m, &mut rng);
            let l = l_energy(&u, &flat);
            let plain = norm_eps(&u, &flat);
            assert_relative_eq!(l.sqrt(), plain, max_relative = 1e-13);
        }
        // Curved hook: c_lo ||u|| <= L(u,u)^{1/2} <= c_hi ||u||.
        for curv in [3.0, -3.0] {
            let params = EpsParams::curved(1, 3, 0.4, curv).unwrap();
            assert!(params.c_lo() <= params.c_hi());
            for _ in 0..20 {
                let u = random_field(&m, &mut rng);
                let l = l_energy(&u, &params).sqrt();
                let n = norm_eps(&u, &params);
                assert!(params.c_lo() * n <= l * (1.0 + 1e-12));
                assert!(l <= params.c_hi() * n * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn odd_power_signs() {
        let m = TorusManifold::circle(TAU, 64).unwrap();
        let u = Field::from_fn(m, |x| x[0].cos());
        let cubed = u.odd_power(3.0);
        for i in 0..u.len() {
            assert_relative_eq!(cubed[i], u[i].powi(3), max_relative = 1e-13, epsilon = 1e-300);
        }
    }
}
