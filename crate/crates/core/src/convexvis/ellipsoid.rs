use crate::surfcalc::EllipsoidCell;
use crate::util;
use crate::{Error, Result};
use nalgebra::DMatrix;
use std::cmp::Ordering;

/// Centred ellipsoid `{x : x^T A x <= 1}` with its principal frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    pub form: DMatrix<f64>,
    /// Unit principal directions, ordered like `semiaxes`.
    pub directions: Vec<Vec<f64>>,
    /// `λ_j^{-1/2}`, descending.
    pub semiaxes: Vec<f64>,
}

impl Ellipsoid {
    pub fn from_form(form: DMatrix<f64>) -> Result<Self> {
        let n = form.nrows();
        if n == 0 || form.ncols() != n {
            return Err(Error::NotSpd);
        }
        let scale = form.amax().max(f64::MIN_POSITIVE);
        if (0..n).any(|i| (0..i).any(|j| (form[(i, j)] - form[(j, i)]).abs() > 1e-12 * scale)) {
            return Err(Error::NotSpd);
        }
        let form = (&form + form.transpose()) * 0.5;
        let eig = form.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return Err(Error::NotSpd);
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let semiaxes = order.iter().map(|&i| 1.0 / eig.eigenvalues[i].sqrt()).collect();
        let directions = order.iter().map(|&i| eig.eigenvectors.column(i).iter().copied().collect()).collect();
        Ok(Ellipsoid { form, directions, semiaxes })
    }

    /// Ellipsoid with the given orthonormal axes and semiaxis lengths.
    pub fn from_axes(directions: &[Vec<f64>], semiaxes: &[f64]) -> Result<Self> {
        let n = directions.len();
        if semiaxes.len() != n || semiaxes.iter().any(|&l| !(l > 0.0)) {
            return Err(Error::NotSpd);
        }
        let mut form = DMatrix::zeros(n, n);
        for (d, l) in directions.iter().zip(semiaxes) {
            let dv = nalgebra::DVector::from_column_slice(d);
            form += &dv * dv.transpose() / (l * l);
        }
        Ellipsoid::from_form(form)
    }

    pub fn ball(n: usize) -> Self {
        Ellipsoid::from_form(DMatrix::identity(n, n)).expect("identity is SPD")
    }

    pub fn n(&self) -> usize {
        self.form.nrows()
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        quad_form(&self.form, x)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.quad(x) <= 1.0
    }

    /// Distance from the centre to the boundary along the unit vector `u`.
    pub fn radial(&self, u: &[f64]) -> f64 {
        1.0 / self.quad(u).sqrt()
    }

    /// `vol(E) / vol(B)`.
    pub fn volume_ratio(&self) -> f64 {
        self.semiaxes.iter().product()
    }

    pub fn volume(&self) -> f64 {
        util::unit_ball_volume(self.n()) * self.volume_ratio()
    }

    /// `t E`.
    pub fn scaled(&self, t: f64) -> Ellipsoid {
        Ellipsoid {
            form: &self.form / (t * t),
            directions: self.directions.clone(),
            semiaxes: self.semiaxes.iter().map(|l| l * t).collect(),
        }
    }

    /// The solid translate `center + t E` as a quadrature cell.
    pub fn cell(&self, center: &[f64], t: f64) -> Result<EllipsoidCell> {
        EllipsoidCell::new(center.to_vec(), &self.form / (t * t))
    }

    pub fn axes_as_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.form.row(i).iter().copied().collect()).collect()
    }
}

pub(crate) fn quad_form(a: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let mut s = 0.0;
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            row += a[(i, j)] * x[j];
        }
        s += x[i] * row;
    }
    s
}

/// Extreme generalised eigenvalues of the pencil `A1 v = λ A2 v`.
fn pencil_extremes(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = a1.nrows();
    if n == 2 {
        // det(A1 - λ A2) = 0 as a quadratic in λ
        let (a, b, c) = (a1[(0, 0)], a1[(0, 1)], a1[(1, 1)]);
        let (p, q, r) = (a2[(0, 0)], a2[(0, 1)], a2[(1, 1)]);
        let qa = p * r - q * q;
        let qb = -(a * r + c * p - 2.0 * b * q);
        let qc = a * c - b * b;
        if !(qa > 0.0 && qc > 0.0 && a > 0.0 && p > 0.0) {
            return Err(Error::NotSpd);
        }
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0).sqrt();
        let big = (-qb + disc) / (2.0 * qa);
        let small = qc / (qa * big);
        return Ok((small.min(big), small.max(big)));
    }
    let chol = a2.clone().cholesky().ok_or(Error::NotSpd)?;
    let l = chol.l();
    let linv = l.try_inverse().ok_or(Error::NotSpd)?;
    let c = &linv * a1 * linv.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let eig = c.symmetric_eigen().eigenvalues;
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) {
        return Err(Error::NotSpd);
    }
    Ok((lo, hi))
}

fn cmp_forms(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Ordering {
    a.iter().zip(b.iter()).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(Ordering::Equal)
}

/// `log inf{α >= 1 : α^{-1} E1 ⊆ E2 ⊆ α E1}` for centred ellipsoids.
///
/// With `E_i = {x^T A_i x <= 1}`, the radial functions satisfy
/// `r_2(u)^2 / r_1(u)^2 = u^T A_1 u / u^T A_2 u`, whose range over the sphere is
/// the range of the generalised eigenvalues of `(A_1, A_2)`. Hence
/// `d = log max(sqrt(λ_max), 1/sqrt(λ_min))`.
pub fn banach_mazur(e1: &Ellipsoid, e2: &Ellipsoid) -> Result<f64> {
    if e1.n() != e2.n() {
        return Err(Error::DimensionMismatch { expected: e1.n(), got: e2.n() });
    }
    // evaluate in a canonical order so the result is exactly symmetric
    let (a, b) = match cmp_forms(&e1.form, &e2.form) {
        Ordering::Equal => return Ok(0.0),
        Ordering::Less => (&e1.form, &e2.form),
        Ordering::Greater => (&e2.form, &e1.form),
    };
    let (lo, hi) = pencil_extremes(a, b)?;
    Ok((0.5 * hi.ln()).max(-0.5 * lo.ln()).max(0.0))
}
