//! Truncated multivariate Taylor arithmetic.
//!
//! A [`Jet`] stores the Taylor coefficients `f^(α)(a)/α!` of a function of
//! `nvars` variables for every multi-index with `|α| <= order`. Monomials are
//! graded by total degree, so the coefficient vector of a lower-order jet is a
//! prefix of the higher-order one.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::{Mutex, OnceLock};

/// Highest derivative order any jet space will be built for.
pub const MAX_ORDER: usize = 8;

/// Monomial tables for one `(nvars, order)` pair. Spaces are interned and live
/// for the whole process.
pub struct JetSpace {
    nvars: usize,
    order: usize,
    monomials: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    // Row i lists the product index of monomial i with each j in the prefix
    // of monomials of degree <= order - deg(i).
    mul_rows: Vec<Vec<u32>>,
    // per variable: (source, target in the order-1 space, factor)
    deriv_tables: Vec<Vec<(u32, u32, f64)>>,
}

impl fmt::Debug for JetSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "JetSpace(nvars={}, order={})", self.nvars, self.order)
    }
}

fn monomials_of_degree(nvars: usize, degree: usize) -> Vec<Vec<u8>> {
    if nvars == 0 {
        return if degree == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    let mut out = Vec::new();
    for first in (0..=degree).rev() {
        for mut tail in monomials_of_degree(nvars - 1, degree - first) {
            let mut m = Vec::with_capacity(nvars);
            m.push(first as u8);
            m.append(&mut tail);
            out.push(m);
        }
    }
    out
}

fn degree(m: &[u8]) -> usize {
    m.iter().map(|&e| e as usize).sum()
}

impl JetSpace {
    /// Interned space for `nvars` variables truncated at `order`.
    pub fn get(nvars: usize, order: usize) -> &'static JetSpace {
        assert!(order <= MAX_ORDER, "jet order {order} exceeds cap {MAX_ORDER}");
        const FAST_VARS: usize = 16;
        static FAST: [[OnceLock<&'static JetSpace>; MAX_ORDER + 1]; FAST_VARS] =
            [const { [const { OnceLock::new() }; MAX_ORDER + 1] }; FAST_VARS];
        if nvars < FAST_VARS {
            return FAST[nvars][order].get_or_init(|| JetSpace::interned(nvars, order));
        }
        JetSpace::interned(nvars, order)
    }

    fn interned(nvars: usize, order: usize) -> &'static JetSpace {
        static CACHE: OnceLock<Mutex<HashMap<(usize, usize), &'static JetSpace>>> =
            OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut guard = cache.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(sp) = guard.get(&(nvars, order)) {
            return sp;
        }
        let sp: &'static JetSpace = Box::leak(Box::new(JetSpace::build(nvars, order)));
        guard.insert((nvars, order), sp);
        sp
    }

    fn build(nvars: usize, order: usize) -> JetSpace {
        let mut monomials = Vec::new();
        for d in 0..=order {
            monomials.extend(monomials_of_degree(nvars, d));
        }
        let index: HashMap<Vec<u8>, usize> = monomials
            .iter()
            .enumerate()
            .map(|(i, m)| (m.clone(), i))
            .collect();

        let mul_rows: Vec<Vec<u32>> = monomials
            .iter()
            .map(|a| {
                let room = order - degree(a);
                monomials
                    .iter()
                    .take_while(|b| degree(b) <= room)
                    .map(|b| {
                        let sum: Vec<u8> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                        index[&sum] as u32
                    })
                    .collect()
            })
            .collect();

        let mut deriv_tables = Vec::with_capacity(nvars);
        if order > 0 {
            let lower: Vec<Vec<u8>> = (0..order)
                .flat_map(|d| monomials_of_degree(nvars, d))
                .collect();
            for v in 0..nvars {
                let mut table = Vec::with_capacity(lower.len());
                for (t, beta) in lower.iter().enumerate() {
                    let mut alpha = beta.clone();
                    alpha[v] += 1;
                    table.push((index[&alpha] as u32, t as u32, alpha[v] as f64));
                }
                deriv_tables.push(table);
            }
        }

        JetSpace {
            nvars,
            order,
            monomials,
            index,
            mul_rows,
            deriv_tables,
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn len(&self) -> usize {
        self.monomials.len()
    }

    pub fn is_empty(&self) -> bool {
        self.monomials.is_empty()
    }

    fn position(&self, exponents: &[u8]) -> Option<usize> {
        self.index.get(exponents).copied()
    }
}

/// Truncated Taylor expansion of a scalar about a point.
#[derive(Clone)]
pub struct Jet {
    space: &'static JetSpace,
    c: Vec<f64>,
}

impl fmt::Debug for Jet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Jet")
            .field("nvars", &self.space.nvars)
            .field("order", &self.space.order)
            .field("coeffs", &self.c)
            .finish()
    }
}

impl Jet {
    pub fn constant(space: &'static JetSpace, value: f64) -> Jet {
        let mut c = vec![0.0; space.len()];
        c[0] = value;
        Jet { space, c }
    }

    /// The coordinate function of variable `var`, expanded about `value`.
    pub fn variable(space: &'static JetSpace, var: usize, value: f64) -> Jet {
        assert!(var < space.nvars, "variable {var} out of range");
        let mut j = Jet::constant(space, value);
        if space.order > 0 {
            let mut e = vec![0u8; space.nvars];
            e[var] = 1;
            let k = space.position(&e).expect("degree-1 monomial");
            j.c[k] = 1.0;
        }
        j
    }

    pub fn zero_like(&self) -> Jet {
        Jet::constant(self.space, 0.0)
    }

    pub fn constant_like(&self, value: f64) -> Jet {
        Jet::constant(self.space, value)
    }

    pub fn space(&self) -> &'static JetSpace {
        self.space
    }

    pub fn order(&self) -> usize {
        self.space.order
    }

    pub fn nvars(&self) -> usize {
        self.space.nvars
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.c
    }

    /// True when every non-constant coefficient is zero.
    pub fn is_constant(&self) -> bool {
        self.c[1..].iter().all(|&x| x == 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.c.iter().all(|x| x.is_finite())
    }

    /// Partial derivative value for a list of variable indices (repeats allowed).
    pub fn derivative(&self, vars: &[usize]) -> f64 {
        if vars.len() > self.order() {
            return 0.0;
        }
        let mut e = vec![0u8; self.nvars()];
        for &v in vars {
            e[v] += 1;
        }
        let k = self.space.position(&e).expect("multi-index within order");
        let fact: f64 = e
            .iter()
            .map(|&a| (1..=a as u32).map(f64::from).product::<f64>())
            .product();
        self.c[k] * fact
    }

    /// Exact partial derivative with respect to `var`; the result has one order less.
    pub fn partial(&self, var: usize) -> Jet {
        assert!(self.order() > 0, "cannot differentiate an order-0 jet");
        let target = JetSpace::get(self.nvars(), self.order() - 1);
        let mut c = vec![0.0; target.len()];
        for &(src, dst, f) in &self.space.deriv_tables[var] {
            c[dst as usize] = f * self.c[src as usize];
        }
        Jet { space: target, c }
    }

    pub fn truncate(&self, order: usize) -> Jet {
        if order >= self.order() {
            return self.clone();
        }
        let target = JetSpace::get(self.nvars(), order);
        Jet {
            space: target,
            c: self.c[..target.len()].to_vec(),
        }
    }

    /// Sets variable `var` to its expansion point and removes it from the space.
    pub fn restrict(&self, var: usize) -> Jet {
        let target = JetSpace::get(self.nvars() - 1, self.order());
        let mut c = vec![0.0; target.len()];
        let mut reduced = Vec::with_capacity(target.nvars);
        for (k, m) in self.space.monomials.iter().enumerate() {
            if m[var] != 0 {
                continue;
            }
            reduced.clear();
            reduced.extend(m.iter().enumerate().filter(|&(i, _)| i != var).map(|(_, &e)| e));
            c[target.position(&reduced).expect("restricted monomial")] = self.c[k];
        }
        Jet { space: target, c }
    }

    fn aligned<'a>(a: &'a Jet, b: &'a Jet) -> (std::borrow::Cow<'a, Jet>, std::borrow::Cow<'a, Jet>) {
        use std::borrow::Cow;
        assert_eq!(a.nvars(), b.nvars(), "jets over different variable sets");
        match a.order().cmp(&b.order()) {
            std::cmp::Ordering::Equal => (Cow::Borrowed(a), Cow::Borrowed(b)),
            std::cmp::Ordering::Less => (Cow::Borrowed(a), Cow::Owned(b.truncate(a.order()))),
            std::cmp::Ordering::Greater => (Cow::Owned(a.truncate(b.order())), Cow::Borrowed(b)),
        }
    }

    fn mul_jet(&self, other: &Jet) -> Jet {
        let (a, b) = Jet::aligned(self, other);
        let sp = a.space;
        let mut c = vec![0.0; sp.len()];
        let (ac, bc) = (&a.c[..], &b.c[..]);
        for (&ai, row) in ac.iter().zip(&sp.mul_rows) {
            if ai == 0.0 {
                continue;
            }
            for (&bj, &k) in bc.iter().zip(row) {
                c[k as usize] += ai * bj;
            }
        }
        Jet { space: sp, c }
    }

    /// Evaluates `Σ_m d[m] (self − a0)^m`, i.e. composes with a univariate
    /// function whose scaled derivatives at `a0` are `d`.
    pub fn compose(&self, d: &[f64]) -> Jet {
        let k = self.order();
        assert!(d.len() > k, "need {} series coefficients", k + 1);
        let mut h = self.clone();
        h.c[0] = 0.0;
        let mut r = self.constant_like(d[k]);
        for m in (0..k).rev() {
            r = r.mul_jet(&h);
            r.c[0] += d[m];
        }
        r
    }

    pub fn recip(&self) -> Jet {
        let a0 = self.value();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut t = 1.0 / a0;
        for _ in 0..=self.order() {
            d.push(t);
            t *= -1.0 / a0;
        }
        self.compose(&d)
    }

    pub fn exp(&self) -> Jet {
        let e = self.value().exp();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut f = 1.0;
        for m in 0..=self.order() {
            if m > 0 {
                f *= m as f64;
            }
            d.push(e / f);
        }
        self.compose(&d)
    }

    /// Natural logarithm; the caller guarantees a positive value.
    pub fn ln(&self) -> Jet {
        let a0 = self.value();
        let mut d = vec![a0.ln()];
        let mut pw = 1.0;
        for m in 1..=self.order() {
            pw *= a0;
            let sign = if m % 2 == 1 { 1.0 } else { -1.0 };
            d.push(sign / (m as f64 * pw));
        }
        self.compose(&d)
    }

    fn trig_series(&self, cycle: [f64; 4]) -> Jet {
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut f = 1.0;
        for m in 0..=self.order() {
            if m > 0 {
                f *= m as f64;
            }
            d.push(cycle[m % 4] / f);
        }
        self.compose(&d)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.trig_series([s, c, -s, -c])
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value().sin_cos();
        self.trig_series([c, -s, -c, s])
    }

    /// `self^c` for real `c` about a positive value.
    pub fn powf_series(&self, c: f64) -> Jet {
        let a0 = self.value();
        let mut d = Vec::with_capacity(self.order() + 1);
        let mut binom = 1.0;
        for m in 0..=self.order() {
            if m > 0 {
                binom *= (c - (m as f64 - 1.0)) / m as f64;
            }
            d.push(binom * a0.powf(c - m as f64));
        }
        self.compose(&d)
    }

    /// Non-negative integer power by repeated squaring; exact at zero.
    pub fn powi(&self, e: u32) -> Jet {
        let mut result = self.constant_like(1.0);
        let mut base = self.clone();
        let mut e = e;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul_jet(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul_jet(&base);
            }
        }
        result
    }

    /// Arctangent of a jet whose value is zero.
    fn atan_at_zero(&self) -> Jet {
        let mut d = vec![0.0; self.order() + 1];
        for (m, slot) in d.iter_mut().enumerate() {
            if m % 2 == 1 {
                let j = (m - 1) / 2;
                *slot = if j % 2 == 0 { 1.0 } else { -1.0 } / m as f64;
            }
        }
        self.compose(&d)
    }

    /// Two-argument arctangent `atan2(self, b)`; the caller guarantees the
    /// value pair is not `(0, 0)`.
    pub fn atan2(&self, b: &Jet) -> Jet {
        let (a, b) = Jet::aligned(self, b);
        let (a0, b0) = (a.value(), b.value());
        let theta0 = a0.atan2(b0);
        let num = &(&*a * b0) - &(&*b * a0);
        let den = &(&*a * a0) + &(&*b * b0);
        let mut u = &num / &den;
        u.c[0] = 0.0;
        let mut r = u.atan_at_zero();
        r.c[0] = theta0;
        r
    }
}

impl PartialEq for Jet {
    fn eq(&self, other: &Jet) -> bool {
        std::ptr::eq(self.space, other.space) && self.c == other.c
    }
}

macro_rules! forward_binop {
    ($tr:ident, $m:ident, $body:expr) => {
        impl $tr<&Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl $tr<&Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl $tr<Jet> for &Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| {
    let (a, b) = Jet::aligned(a, b);
    Jet {
        space: a.space,
        c: a.c.iter().zip(&b.c).map(|(x, y)| x + y).collect(),
    }
});
forward_binop!(Sub, sub, |a, b| {
    let (a, b) = Jet::aligned(a, b);
    Jet {
        space: a.space,
        c: a.c.iter().zip(&b.c).map(|(x, y)| x - y).collect(),
    }
});
forward_binop!(Mul, mul, |a, b| a.mul_jet(b));
forward_binop!(Div, div, |a, b| a.mul_jet(&b.recip()));

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet {
            space: self.space,
            c: self.c.iter().map(|x| -x).collect(),
        }
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(mut self) -> Jet {
        self.c.iter_mut().for_each(|x| *x = -*x);
        self
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, s: f64) -> Jet {
        Jet {
            space: self.space,
            c: self.c.iter().map(|x| x * s).collect(),
        }
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(mut self, s: f64) -> Jet {
        self.c.iter_mut().for_each(|x| *x *= s);
        self
    }
}

impl Div<f64> for &Jet {
    type Output = Jet;
    fn div(self, s: f64) -> Jet {
        Jet {
            space: self.space,
            c: self.c.iter().map(|x| x / s).collect(),
        }
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, s: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] += s;
        j
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, s: f64) -> Jet {
        let mut j = self.clone();
        j.c[0] -= s;
        j
    }
}

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        if self.order() > rhs.order() {
            *self = self.truncate(rhs.order());
        }
        assert_eq!(self.nvars(), rhs.nvars(), "jets over different variable sets");
        for (x, y) in self.c.iter_mut().zip(&rhs.c) {
            *x += y;
        }
    }
}

impl AddAssign<Jet> for Jet {
    fn add_assign(&mut self, rhs: Jet) {
        *self += &rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        if self.order() > rhs.order() {
            *self = self.truncate(rhs.order());
        }
        assert_eq!(self.nvars(), rhs.nvars(), "jets over different variable sets");
        for (x, y) in self.c.iter_mut().zip(&rhs.c) {
            *x -= y;
        }
    }
}

impl SubAssign<Jet> for Jet {
    fn sub_assign(&mut self, rhs: Jet) {
        *self -= &rhs;
    }
}

impl MulAssign<f64> for Jet {
    fn mul_assign(&mut self, s: f64) {
        self.c.iter_mut().for_each(|x| *x *= s);
    }
}

/// Error from [`invert`] when a pivot vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularMatrix {
    pub det: f64,
}

/// Inverts a square matrix of jets by Gauss-Jordan elimination with partial
/// pivoting on the values. Returns the inverse and the determinant value.
pub fn invert(m: &[Vec<Jet>], cutoff: f64) -> Result<(Vec<Vec<Jet>>, f64), SingularMatrix> {
    let n = m.len();
    let one = m[0][0].constant_like(1.0);
    let zero = m[0][0].zero_like();
    let mut a: Vec<Vec<Jet>> = m.to_vec();
    let mut inv: Vec<Vec<Jet>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { one.clone() } else { zero.clone() }).collect())
        .collect();
    let mut det = 1.0;
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&r, &s| a[r][col].value().abs().total_cmp(&a[s][col].value().abs()))
            .unwrap_or(col);
        if piv != col {
            a.swap(piv, col);
            inv.swap(piv, col);
            det = -det;
        }
        det *= a[col][col].value();
        if a[col][col].value().abs() < f64::MIN_POSITIVE {
            return Err(SingularMatrix { det: 0.0 });
        }
        let r = a[col][col].recip();
        for j in 0..n {
            a[col][j] = &a[col][j] * &r;
            inv[col][j] = &inv[col][j] * &r;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col].clone();
            if f.c.iter().all(|&x| x == 0.0) {
                continue;
            }
            for j in 0..n {
                let t = &f * &a[col][j];
                a[row][j] -= t;
                let t = &f * &inv[col][j];
                inv[row][j] -= t;
            }
        }
    }
    if det.abs() < cutoff {
        return Err(SingularMatrix { det });
    }
    Ok((inv, det))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(n: usize, k: usize, at: &[f64]) -> Vec<Jet> {
        let sp = JetSpace::get(n, k);
        at.iter().enumerate().map(|(i, &v)| Jet::variable(sp, i, v)).collect()
    }

    #[test]
    fn space_sizes_are_binomial() {
        assert_eq!(JetSpace::get(2, 3).len(), 10);
        assert_eq!(JetSpace::get(4, 3).len(), 35);
        assert_eq!(JetSpace::get(6, 4).len(), 210);
    }

    #[test]
    fn lower_order_is_prefix() {
        let hi = JetSpace::get(3, 4);
        let lo = JetSpace::get(3, 2);
        assert_eq!(&hi.monomials[..lo.len()], &lo.monomials[..]);
    }

    #[test]
    fn product_rule() {
        let v = vars(2, 3, &[3.0, 4.0]);
        let f = &(&v[0] * &v[0]) * &v[1];
        assert_eq!(f.value(), 36.0);
        assert_eq!(f.derivative(&[0]), 24.0);
        assert_eq!(f.derivative(&[0, 1]), 6.0);
        assert_eq!(f.derivative(&[0, 0, 1]), 2.0);
        assert_eq!(f.derivative(&[1, 1]), 0.0);
    }

    #[test]
    fn partial_matches_derivative() {
        let v = vars(2, 3, &[0.3, -0.7]);
        let f = (&v[0] * &v[1]).sin();
        let g = f.partial(0);
        assert_eq!(g.order(), 2);
        assert!((g.derivative(&[1]) - f.derivative(&[0, 1])).abs() < 1e-15);
        assert!((g.derivative(&[0, 1]) - f.derivative(&[0, 0, 1])).abs() < 1e-15);
    }

    #[test]
    fn elementary_functions() {
        let v = vars(1, 4, &[0.5]);
        let x = &v[0];
        let e = x.exp();
        for k in 0..=4 {
            let idx = vec![0; k];
            assert!((e.derivative(&idx) - 0.5f64.exp()).abs() < 1e-14);
        }
        let l = x.ln();
        assert!((l.derivative(&[0, 0, 0]) - 2.0 / 0.125).abs() < 1e-12);
        let s = x.powf_series(0.5);
        assert!((s.derivative(&[0]) - 0.5 / 0.5f64.sqrt()).abs() < 1e-14);
        let r = x.recip();
        assert!((r.derivative(&[0, 0]) - 2.0 / 0.125).abs() < 1e-12);
        let c = x.cos();
        assert!((c.derivative(&[0, 0, 0]) - 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn atan2_derivatives() {
        let v = vars(2, 3, &[-0.4, -1.3]);
        let t = v[0].atan2(&v[1]);
        let (a, b) = (-0.4f64, -1.3f64);
        let r2 = a * a + b * b;
        assert!((t.value() - a.atan2(b)).abs() < 1e-15);
        assert!((t.derivative(&[0]) - b / r2).abs() < 1e-14);
        assert!((t.derivative(&[1]) + a / r2).abs() < 1e-14);
        assert!((t.derivative(&[0, 0]) + 2.0 * a * b / (r2 * r2)).abs() < 1e-13);
    }

    #[test]
    fn restrict_drops_variable() {
        let v = vars(3, 2, &[1.0, 2.0, 0.0]);
        let f = &(&v[0] * &v[2]) + &(&v[1] * &v[1]);
        let g = f.restrict(2);
        assert_eq!(g.nvars(), 2);
        assert_eq!(g.value(), 4.0);
        assert_eq!(g.derivative(&[0]), 0.0);
        assert_eq!(g.derivative(&[1, 1]), 2.0);
    }

    #[test]
    fn mixed_orders_truncate() {
        let v = vars(2, 3, &[1.0, 1.0]);
        let w = v[1].truncate(1);
        let f = &v[0] * &w;
        assert_eq!(f.order(), 1);
    }

    #[test]
    fn inverse_of_jet_matrix() {
        let v = vars(2, 2, &[2.0, 1.0]);
        let m = vec![
            vec![v[0].clone(), v[1].clone()],
            vec![v[1].clone(), v[0].clone() * 3.0],
        ];
        let (inv, det) = invert(&m, 1e-12).unwrap();
        assert!((det - 11.0).abs() < 1e-14);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = m[i][0].zero_like();
                for k in 0..2 {
                    s += &m[i][k] * &inv[k][j];
                }
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((s.value() - expect).abs() < 1e-14);
                assert!(s.coefficients()[1..].iter().all(|c| c.abs() < 1e-13));
            }
        }
    }

    #[test]
    fn singular_detected() {
        let v = vars(2, 1, &[1.0, 1.0]);
        let m = vec![vec![v[0].clone(), v[0].clone()], vec![v[1].clone(), v[1].clone()]];
        assert!(invert(&m, 1e-12).is_err());
    }
}
