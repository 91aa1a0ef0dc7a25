//! Boundary-layer shear profiles `V(Y)` on the half-line and the strong-concavity certificate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default truncation length of the half-line.
pub const DEFAULT_LENGTH: f64 = 40.0;
/// Safety factor applied to the grid supremum when certifying the concavity constant.
pub const M_SAFETY: f64 = 1.01;
/// Tolerance for the boundary and far-field limits.
const LIMIT_TOL: f64 = 1e-8;

/// Names accepted by [`make_builtin_profile`].
pub const CATALOGUE: [&str; 3] = ["exp", "tanh", "erf"];

#[derive(Debug, Clone, PartialEq)]
enum Shape {
    /// `1 − e^{−Y}`.
    Exp,
    /// `tanh Y`.
    Tanh,
    /// `erf Y`.
    Erf,
    Table(Table),
}

/// Tabulated profile: nodes with `(V, V′, V″, V‴)`, interpolated by cubic Hermite pieces
/// (each derivative level uses the next level as its slope).
#[derive(Debug, Clone, PartialEq)]
struct Table {
    y: Vec<f64>,
    d: [Vec<f64>; 4],
}

/// A shear profile with analytic (or tabulated) derivatives up to third order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShearProfile {
    pub name: String,
    shape: Shape,
    /// `Σ_{k≤2} sup (1+Y)^k |∂^k V|`.
    pub profile_norm: f64,
    /// Certified concavity constant, present when the profile passes the check on the
    /// default node set.
    pub concavity_m: Option<f64>,
    /// `1/(2(1+‖V‖))`.
    pub delta0: f64,
    /// False for tabulated profiles whose derivatives were completed by splines.
    pub certified: bool,
}

impl ShearProfile {
    /// `(V, V′, V″, V‴)` at `y ≥ 0`.
    pub fn eval(&self, y: f64) -> [f64; 4] {
        match &self.shape {
            Shape::Exp => {
                let e = (-y).exp();
                [1.0 - e, e, -e, e]
            }
            Shape::Tanh => {
                let t = y.tanh();
                let s2 = 1.0 - t * t;
                [t, s2, -2.0 * t * s2, -2.0 * s2 * s2 + 4.0 * t * t * s2]
            }
            Shape::Erf => {
                let g = std::f64::consts::FRAC_2_SQRT_PI * (-y * y).exp();
                [statrs::function::erf::erf(y), g, -2.0 * y * g, (4.0 * y * y - 2.0) * g]
            }
            Shape::Table(t) => t.eval(y),
        }
    }

    /// Derivative of order `k ≤ 3` at `y`.
    pub fn eval_k(&self, k: usize, y: f64) -> f64 {
        self.eval(y)[k]
    }

    /// `V′(0)`.
    pub fn slope_at_wall(&self) -> f64 {
        self.eval(0.0)[1]
    }

    /// Sample `(V, V′, V″)` at the given nodes.
    pub fn sample(&self, nodes: &[f64]) -> [Vec<f64>; 3] {
        let mut out = [Vec::with_capacity(nodes.len()), Vec::with_capacity(nodes.len()), Vec::with_capacity(nodes.len())];
        for &y in nodes {
            let v = self.eval(y);
            for k in 0..3 {
                out[k].push(v[k]);
            }
        }
        out
    }

    fn far_end(&self) -> f64 {
        match &self.shape {
            Shape::Table(t) => *t.y.last().expect("tables have nodes"),
            _ => DEFAULT_LENGTH,
        }
    }

    fn finish(name: String, shape: Shape, certified: bool) -> ShearProfile {
        let mut p = ShearProfile { name, shape, profile_norm: 0.0, concavity_m: None, delta0: 0.0, certified };
        p.profile_norm = profile_norm(&p);
        p.delta0 = delta0_of(p.profile_norm);
        let report = check_sc(&p, &default_nodes(p.far_end()));
        if report.pass {
            p.concavity_m = Some(report.certified_m);
        }
        p
    }
}

/// `δ₀ = 1/(2(1+‖V‖))`.
pub fn delta0_of(profile_norm: f64) -> f64 {
    1.0 / (2.0 * (1.0 + profile_norm))
}

/// Instantiate a catalogued profile.
pub fn make_builtin_profile(name: &str) -> Result<ShearProfile> {
    let shape = match name {
        "exp" => Shape::Exp,
        "tanh" => Shape::Tanh,
        "erf" => Shape::Erf,
        other => return Err(Error::Catalogue(other.to_string())),
    };
    Ok(ShearProfile::finish(name.to_string(), shape, true))
}

/// Nodes used for the norm and the default certificate: dense near the wall, geometric
/// spacing further out.
pub fn default_nodes(length: f64) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..=4000).map(|i| 8.0 * i as f64 / 4000.0).collect();
    let mut y: f64 = 8.0;
    while y < length {
        y = (y * 1.002).min(length);
        nodes.push(y);
    }
    nodes
}

/// Supremum of `(1+Y)^k |∂^k V|`, refined by golden-section search around the grid maximum.
fn weighted_sup(p: &ShearProfile, k: usize, nodes: &[f64]) -> f64 {
    let f = |y: f64| (1.0 + y).powi(k as i32) * p.eval(y)[k].abs();
    let (mut imax, mut best) = (0, f64::NEG_INFINITY);
    for (i, &y) in nodes.iter().enumerate() {
        let v = f(y);
        if v > best {
            best = v;
            imax = i;
        }
    }
    let mut a = nodes[imax.saturating_sub(1)];
    let mut b = nodes[(imax + 1).min(nodes.len() - 1)];
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(f(0.5 * (a + b)))
}

fn profile_norm(p: &ShearProfile) -> f64 {
    let nodes = default_nodes(p.far_end());
    let mut total = 0.0;
    for k in 0..3 {
        let mut s = weighted_sup(p, k, &nodes);
        if k == 0 {
            // monotone profiles approach their supremum 1 only in the limit
            s = s.max(p.eval(p.far_end())[0].abs().max(1.0));
        }
        total += s;
    }
    total
}

/// Result of the strong-concavity check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScReport {
    pub profile: String,
    pub pass: bool,
    /// Grid supremum of `max{(V′)²/(−V″), |V‴/V″| + |V″/V′|}`.
    pub minimal_m: f64,
    /// `minimal_m` with the safety factor applied.
    pub certified_m: f64,
    /// First failing node.
    pub witness: Option<f64>,
    pub reason: Option<String>,
    pub nodes: usize,
    /// False when the profile's derivatives were completed by interpolation.
    pub certified_derivatives: bool,
}

/// Check the strong-concavity condition at every node: `V(0) = 0`, `V → 1`, `V′ > 0`,
/// `V″ < 0`, and record the smallest admissible `M`.
pub fn check_sc(profile: &ShearProfile, nodes: &[f64]) -> ScReport {
    let mut report = ScReport {
        profile: profile.name.clone(),
        pass: true,
        minimal_m: 0.0,
        certified_m: 0.0,
        witness: None,
        reason: None,
        nodes: nodes.len(),
        certified_derivatives: profile.certified,
    };
    let fail = |report: &mut ScReport, y: f64, why: String| {
        if report.pass {
            report.pass = false;
            report.witness = Some(y);
            report.reason = Some(why);
        }
    };
    let v0 = profile.eval(0.0)[0];
    if v0.abs() > LIMIT_TOL {
        fail(&mut report, 0.0, format!("V(0) = {v0:e} is not zero"));
    }
    let far = profile.far_end();
    let vl = profile.eval(far)[0];
    if (vl - 1.0).abs() > LIMIT_TOL {
        fail(&mut report, far, format!("V({far}) = {vl} does not approach 1"));
    }
    let mut m: f64 = 0.0;
    for &y in nodes {
        let [_, d1, d2, d3] = profile.eval(y);
        if !(d1 > 0.0) {
            if d1 == 0.0 && d2 == 0.0 && d3 == 0.0 {
                // the profile has numerically reached its plateau; the ratios are vacuous here
                continue;
            }
            fail(&mut report, y, format!("V′({y}) = {d1:e} is not positive"));
            continue;
        }
        if !(d2 < 0.0) {
            fail(&mut report, y, format!("V″({y}) = {d2:e} is not negative while V′ > 0"));
            continue;
        }
        let r1 = d1 * d1 / (-d2);
        let r2 = (d3 / d2).abs() + (d2 / d1).abs();
        m = m.max(r1).max(r2);
    }
    report.minimal_m = if report.pass { m } else { f64::INFINITY };
    report.certified_m = report.minimal_m * M_SAFETY;
    report
}

impl Table {
    fn eval(&self, y: f64) -> [f64; 4] {
        let n = self.y.len();
        let last = n - 1;
        if y >= self.y[last] {
            return [self.d[0][last], self.d[1][last], self.d[2][last], self.d[3][last]];
        }
        let i = match self.y.partition_point(|&t| t <= y) {
            0 => 0,
            p => p - 1,
        }
        .min(last - 1);
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let h = y1 - y0;
        let t = (y - y0) / h;
        let herm = |f0: f64, f1: f64, s0: f64, s1: f64| {
            let (t2, t3) = (t * t, t * t * t);
            (2.0 * t3 - 3.0 * t2 + 1.0) * f0 + (t3 - 2.0 * t2 + t) * h * s0 + (-2.0 * t3 + 3.0 * t2) * f1 + (t3 - t2) * h * s1
        };
        let mut out = [0.0; 4];
        for k in 0..3 {
            out[k] = herm(self.d[k][i], self.d[k][i + 1], self.d[k + 1][i], self.d[k + 1][i + 1]);
        }
        out[3] = self.d[3][i] * (1.0 - t) + self.d[3][i + 1] * t;
        out
    }
}

/// Derivatives of the natural cubic spline through `(x, f)` at the nodes.
fn spline_slopes(x: &[f64], f: &[f64]) -> Vec<f64> {
    let n = x.len();
    // second derivatives from the tridiagonal system with natural end conditions
    let mut m2 = vec![0.0; n];
    if n > 2 {
        let mut diag = vec![0.0; n];
        let mut rhs = vec![0.0; n];
        let mut sup = vec![0.0; n];
        for i in 1..n - 1 {
            let h0 = x[i] - x[i - 1];
            let h1 = x[i + 1] - x[i];
            diag[i] = 2.0 * (h0 + h1);
            sup[i] = h1;
            rhs[i] = 6.0 * ((f[i + 1] - f[i]) / h1 - (f[i] - f[i - 1]) / h0);
        }
        for i in 2..n - 1 {
            let h0 = x[i] - x[i - 1];
            let w = h0 / diag[i - 1];
            diag[i] -= w * sup[i - 1];
            rhs[i] -= w * rhs[i - 1];
        }
        for i in (1..n - 1).rev() {
            m2[i] = (rhs[i] - sup[i] * m2[i + 1]) / diag[i];
        }
    }
    (0..n)
        .map(|i| {
            let j = if i + 1 < n { i } else { i - 1 };
            let h = x[j + 1] - x[j];
            let base = (f[j + 1] - f[j]) / h;
            if j == i {
                base - h * (2.0 * m2[j] + m2[j + 1]) / 6.0
            } else {
                base + h * (m2[j] + 2.0 * m2[j + 1]) / 6.0
            }
        })
        .collect()
}

/// Load a tabulated profile from CSV with header columns `Y,V[,V1,V2,V3]`. Missing derivative
/// columns are completed by natural cubic splines and the profile is marked uncertified.
pub fn load_tabulated_profile(path: &Path, name: &str) -> Result<ShearProfile> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_path(path)
        .map_err(|e| Error::Config(format!("cannot read profile table {}: {e}", path.display())))?;
    let mut cols: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::Config(format!("profile table: {e}")))?;
        if cols.is_empty() {
            cols = vec![Vec::new(); rec.len()];
        }
        if rec.len() != cols.len() {
            return Err(Error::Config("profile table has ragged rows".into()));
        }
        for (c, field) in cols.iter_mut().zip(rec.iter()) {
            c.push(field.parse().map_err(|_| Error::Config(format!("profile table: bad number `{field}`")))?);
        }
    }
    if !(cols.len() == 2 || cols.len() == 5) || cols[0].len() < 4 {
        return Err(Error::Config("profile table needs columns Y,V or Y,V,V1,V2,V3 and at least 4 rows".into()));
    }
    if cols[0].windows(2).any(|w| !(w[1] > w[0])) || cols[0][0] != 0.0 {
        return Err(Error::Config("profile table Y must start at 0 and increase strictly".into()));
    }
    let y = cols[0].clone();
    let certified = cols.len() == 5;
    let d = if certified {
        [cols[1].clone(), cols[2].clone(), cols[3].clone(), cols[4].clone()]
    } else {
        let d1 = spline_slopes(&y, &cols[1]);
        let d2 = spline_slopes(&y, &d1);
        let d3 = spline_slopes(&y, &d2);
        [cols[1].clone(), d1, d2, d3]
    };
    Ok(ShearProfile::finish(name.to_string(), Shape::Table(Table { y, d }), certified))
}
