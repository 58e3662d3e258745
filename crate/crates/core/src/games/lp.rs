//! Dense two-phase primal simplex with bounded variables and Bland's rule.
//!
//! Problems are stated as `maximize c·x` subject to linear rows and per-variable
//! bounds (either side may be infinite). Upper bounds are handled implicitly by
//! the bounded-variable ratio test, so box constraints cost no tableau rows.

use crate::error::{Result, SqError};

const PIVOT_EPS: f64 = 1e-11;
const COST_EPS: f64 = 1e-10;
const TIE_EPS: f64 = 1e-12;
const FEAS_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

/// `maximize objective·x` subject to `constraints` and `lower ≤ x ≤ upper`.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<Constraint>,
}

impl LinearProgram {
    /// Non-negative variables, no rows.
    pub fn maximize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        LinearProgram { objective, lower: vec![0.0; n], upper: vec![f64::INFINITY; n], constraints: Vec::new() }
    }

    pub fn bound(&mut self, var: usize, lower: f64, upper: f64) -> &mut Self {
        self.lower[var] = lower;
        self.upper[var] = upper;
        self
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub objective: f64,
    pub x: Vec<f64>,
    /// One multiplier per row, in the sign convention of the original row
    /// (`≥ 0` for `≤` rows of a maximization, `≤ 0` for `≥` rows).
    pub duals: Vec<f64>,
    pub duality_gap: f64,
    pub primal_violation: f64,
    pub dual_violation: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
enum VarMap {
    Shift { col: usize, lo: f64 },
    Reflect { col: usize, hi: f64 },
    Split { pos: usize, neg: usize },
}

struct Tableau {
    m: usize,
    n: usize,
    t: Vec<f64>,
    xb: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    at_upper: Vec<bool>,
    ub: Vec<f64>,
    d: Vec<f64>,
    iterations: usize,
    limit: usize,
}

impl Tableau {
    fn row(&self, i: usize) -> &[f64] {
        &self.t[i * self.n..(i + 1) * self.n]
    }

    fn reset_costs(&mut self, c: &[f64]) {
        self.d.copy_from_slice(c);
        for i in 0..self.m {
            let cb = c[self.basis[i]];
            if cb != 0.0 {
                for j in 0..self.n {
                    self.d[j] -= cb * self.t[i * self.n + j];
                }
            }
        }
    }

    fn optimize(&mut self, allowed: &[bool]) -> Result<()> {
        loop {
            if self.iterations >= self.limit {
                return Err(SqError::IterationLimit(self.limit));
            }
            let entering = (0..self.n).find(|&j| {
                allowed[j]
                    && !self.is_basic[j]
                    && ((!self.at_upper[j] && self.d[j] > COST_EPS) || (self.at_upper[j] && self.d[j] < -COST_EPS))
            });
            let Some(j) = entering else { return Ok(()) };
            self.iterations += 1;
            let dir = if self.at_upper[j] { -1.0 } else { 1.0 };

            let mut theta = self.ub[j];
            let mut leave: Option<(usize, bool)> = None;
            for i in 0..self.m {
                let alpha = dir * self.t[i * self.n + j];
                let (limit, to_upper) = if alpha > PIVOT_EPS {
                    (self.xb[i].max(0.0) / alpha, false)
                } else if alpha < -PIVOT_EPS && self.ub[self.basis[i]].is_finite() {
                    ((self.ub[self.basis[i]] - self.xb[i]).max(0.0) / -alpha, true)
                } else {
                    continue;
                };
                let better = match leave {
                    _ if limit < theta - TIE_EPS => true,
                    Some((r, _)) => limit <= theta + TIE_EPS && self.basis[i] < self.basis[r],
                    None => false,
                };
                if better {
                    theta = limit;
                    leave = Some((i, to_upper));
                }
            }
            if theta.is_infinite() {
                return Err(SqError::Unbounded);
            }
            for i in 0..self.m {
                self.xb[i] -= dir * self.t[i * self.n + j] * theta;
            }
            let Some((r, to_upper)) = leave else {
                self.at_upper[j] = !self.at_upper[j];
                continue;
            };
            let entering_value = if dir > 0.0 { theta } else { self.ub[j] - theta };
            let l = self.basis[r];
            self.is_basic[l] = false;
            self.at_upper[l] = to_upper;
            self.basis[r] = j;
            self.is_basic[j] = true;
            self.at_upper[j] = false;
            self.xb[r] = entering_value;
            self.pivot(r, j);
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let n = self.n;
        let p = self.t[r * n + j];
        for k in 0..n {
            self.t[r * n + k] /= p;
        }
        self.t[r * n + j] = 1.0;
        let pivot_row: Vec<f64> = self.row(r).to_vec();
        for i in 0..self.m {
            if i == r {
                continue;
            }
            let f = self.t[i * n + j];
            if f != 0.0 {
                let row = &mut self.t[i * n..(i + 1) * n];
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a -= f * b;
                }
                row[j] = 0.0;
            }
        }
        let f = self.d[j];
        if f != 0.0 {
            for (a, b) in self.d.iter_mut().zip(&pivot_row) {
                *a -= f * b;
            }
            self.d[j] = 0.0;
        }
    }

    fn value(&self, col: usize) -> f64 {
        if self.is_basic[col] {
            let r = self.basis.iter().position(|&b| b == col).expect("basic column in basis");
            self.xb[r]
        } else if self.at_upper[col] {
            self.ub[col]
        } else {
            0.0
        }
    }
}

/// Solves `lp`; infeasible and unbounded programs are reported as distinct
/// errors.
pub fn lp_solve(lp: &LinearProgram) -> Result<LpSolution> {
    let nv = lp.num_vars();
    if lp.lower.len() != nv || lp.upper.len() != nv {
        return Err(SqError::InvalidArgument("bounds must match the number of variables".into()));
    }
    for (k, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != nv {
            return Err(SqError::InvalidArgument(format!("row {k} has {} coefficients, expected {nv}", c.coeffs.len())));
        }
    }
    for j in 0..nv {
        if lp.lower[j] > lp.upper[j] || lp.lower[j] == f64::INFINITY || lp.upper[j] == f64::NEG_INFINITY {
            return Err(SqError::Infeasible);
        }
    }

    // Structural columns.
    let mut maps = Vec::with_capacity(nv);
    let mut ub: Vec<f64> = Vec::new();
    for j in 0..nv {
        let (lo, hi) = (lp.lower[j], lp.upper[j]);
        if lo.is_finite() {
            maps.push(VarMap::Shift { col: ub.len(), lo });
            ub.push(hi - lo);
        } else if hi.is_finite() {
            maps.push(VarMap::Reflect { col: ub.len(), hi });
            ub.push(f64::INFINITY);
        } else {
            maps.push(VarMap::Split { pos: ub.len(), neg: ub.len() + 1 });
            ub.push(f64::INFINITY);
            ub.push(f64::INFINITY);
        }
    }
    let n_struct = ub.len();
    let mut cost = vec![0.0; n_struct];
    let mut constant = 0.0;
    for (j, map) in maps.iter().enumerate() {
        let c = lp.objective[j];
        match *map {
            VarMap::Shift { col, lo } => {
                cost[col] = c;
                constant += c * lo;
            }
            VarMap::Reflect { col, hi } => {
                cost[col] = -c;
                constant += c * hi;
            }
            VarMap::Split { pos, neg } => {
                cost[pos] = c;
                cost[neg] = -c;
            }
        }
    }

    // Rows in internal columns, normalized to non-negative right-hand sides.
    let m = lp.constraints.len();
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut rels = Vec::with_capacity(m);
    let mut flipped = Vec::with_capacity(m);
    for c in &lp.constraints {
        let mut row = vec![0.0; n_struct];
        let mut b = c.rhs;
        for (j, map) in maps.iter().enumerate() {
            let a = c.coeffs[j];
            if a == 0.0 {
                continue;
            }
            match *map {
                VarMap::Shift { col, lo } => {
                    row[col] = a;
                    b -= a * lo;
                }
                VarMap::Reflect { col, hi } => {
                    row[col] = -a;
                    b -= a * hi;
                }
                VarMap::Split { pos, neg } => {
                    row[pos] = a;
                    row[neg] = -a;
                }
            }
        }
        let mut rel = c.relation;
        let flip = b < 0.0;
        if flip {
            b = -b;
            row.iter_mut().for_each(|v| *v = -*v);
            rel = match rel {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            };
        }
        rows.push(row);
        rhs.push(b);
        rels.push(rel);
        flipped.push(flip);
    }

    // Slack, surplus and artificial columns.
    let mut n = n_struct;
    let mut init_col = vec![0; m];
    let mut extra: Vec<(usize, usize, f64)> = Vec::new();
    let mut artificial = Vec::new();
    for i in 0..m {
        match rels[i] {
            Relation::Le => {
                init_col[i] = n;
                extra.push((i, n, 1.0));
                n += 1;
            }
            Relation::Ge => {
                extra.push((i, n, -1.0));
                n += 1;
                init_col[i] = n;
                extra.push((i, n, 1.0));
                artificial.push(n);
                n += 1;
            }
            Relation::Eq => {
                init_col[i] = n;
                extra.push((i, n, 1.0));
                artificial.push(n);
                n += 1;
            }
        }
    }
    ub.resize(n, f64::INFINITY);
    let mut t = vec![0.0; m * n];
    for (i, row) in rows.iter().enumerate() {
        t[i * n..i * n + n_struct].copy_from_slice(row);
    }
    for &(i, col, v) in &extra {
        t[i * n + col] = v;
    }
    let mut is_basic = vec![false; n];
    for &c in &init_col {
        is_basic[c] = true;
    }
    let mut tab = Tableau {
        m,
        n,
        t,
        xb: rhs.clone(),
        basis: init_col.clone(),
        is_basic,
        at_upper: vec![false; n],
        ub,
        d: vec![0.0; n],
        iterations: 0,
        limit: 50_000 + 200 * (m + n),
    };

    let scale = 1.0 + rhs.iter().fold(0.0f64, |a, b| a.max(*b));
    let mut allowed = vec![true; n];
    if !artificial.is_empty() {
        let mut c1 = vec![0.0; n];
        for &a in &artificial {
            c1[a] = -1.0;
        }
        tab.reset_costs(&c1);
        tab.optimize(&allowed)?;
        let infeasibility: f64 = artificial.iter().map(|&a| tab.value(a)).sum();
        if infeasibility > FEAS_EPS * scale {
            return Err(SqError::Infeasible);
        }
        for &a in &artificial {
            tab.ub[a] = 0.0;
            allowed[a] = false;
            if !tab.is_basic[a] {
                tab.at_upper[a] = false;
            }
        }
    }
    let mut c2 = vec![0.0; n];
    c2[..n_struct].copy_from_slice(&cost);
    tab.reset_costs(&c2);
    tab.optimize(&allowed)?;

    // Primal recovery.
    let internal: Vec<f64> = (0..n).map(|c| tab.value(c)).collect();
    let x: Vec<f64> = maps
        .iter()
        .map(|map| match *map {
            VarMap::Shift { col, lo } => lo + internal[col],
            VarMap::Reflect { col, hi } => hi - internal[col],
            VarMap::Split { pos, neg } => internal[pos] - internal[neg],
        })
        .collect();
    let objective: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
    let internal_obj: f64 = cost.iter().zip(&internal).map(|(c, v)| c * v).sum();
    debug_assert!((internal_obj + constant - objective).abs() <= 1e-7 * (1.0 + objective.abs()));

    // Duals from the reduced costs of the initial basis columns.
    let pi: Vec<f64> = init_col.iter().map(|&c| -tab.d[c]).collect();
    let duals: Vec<f64> = pi.iter().zip(&flipped).map(|(&y, &f)| if f { -y } else { y }).collect();
    let mut dual_obj: f64 = rhs.iter().zip(&pi).map(|(b, y)| b * y).sum();
    let mut dual_violation: f64 = 0.0;
    for j in 0..n {
        if artificial.contains(&j) {
            continue;
        }
        if tab.ub[j].is_finite() {
            dual_obj += tab.ub[j] * tab.d[j].max(0.0);
        } else {
            dual_violation = dual_violation.max(tab.d[j]);
        }
    }
    for (i, rel) in rels.iter().enumerate() {
        let wrong_sign = match rel {
            Relation::Le => -pi[i],
            Relation::Ge => pi[i],
            Relation::Eq => 0.0,
        };
        dual_violation = dual_violation.max(wrong_sign);
    }
    let duality_gap = (dual_obj - internal_obj).abs();

    let mut primal_violation: f64 = 0.0;
    for c in &lp.constraints {
        let lhs: f64 = c.coeffs.iter().zip(&x).map(|(a, v)| a * v).sum();
        let v = match c.relation {
            Relation::Le => lhs - c.rhs,
            Relation::Ge => c.rhs - lhs,
            Relation::Eq => (lhs - c.rhs).abs(),
        };
        primal_violation = primal_violation.max(v);
    }
    for j in 0..nv {
        primal_violation = primal_violation.max(lp.lower[j] - x[j]).max(x[j] - lp.upper[j]);
    }

    Ok(LpSolution {
        objective,
        x,
        duals,
        duality_gap,
        primal_violation,
        dual_violation,
        iterations: tab.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_upper_bound_row() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, 3.0);
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.objective, 3.0);
        assert_eq!(s.duals, vec![1.0]);
    }

    #[test]
    fn box_only_goes_to_corner() {
        let mut lp = LinearProgram::maximize(vec![1.0, -2.0, 0.5]);
        lp.bound(0, -1.0, 1.0).bound(1, -1.0, 1.0).bound(2, -3.0, 2.0);
        let s = lp_solve(&lp).unwrap();
        assert_eq!(s.x, vec![1.0, -1.0, 2.0]);
        assert_eq!(s.objective, 4.0);
    }

    #[test]
    fn reports_infeasible_and_unbounded() {
        let mut lp = LinearProgram::maximize(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Ge, 2.0).constrain(vec![1.0], Relation::Le, 1.0);
        assert_eq!(lp_solve(&lp).unwrap_err(), SqError::Infeasible);
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Le, 1.0);
        assert_eq!(lp_solve(&lp).unwrap_err(), SqError::Unbounded);
    }

    #[test]
    fn equality_and_free_variables() {
        // max x + y, x + y = 2, x − y ≥ −4, x free, y ≤ 5
        let mut lp = LinearProgram::maximize(vec![1.0, 1.0]);
        lp.bound(0, f64::NEG_INFINITY, f64::INFINITY).bound(1, f64::NEG_INFINITY, 5.0);
        lp.constrain(vec![1.0, 1.0], Relation::Eq, 2.0).constrain(vec![1.0, -1.0], Relation::Ge, -4.0);
        let s = lp_solve(&lp).unwrap();
        assert!((s.objective - 2.0).abs() < 1e-12);
        assert!(s.primal_violation < 1e-12 && s.duality_gap < 1e-9);
    }

    #[test]
    fn degenerate_vertex_terminates() {
        // Classic cycling example for the largest-coefficient rule.
        let mut lp = LinearProgram::maximize(vec![10.0, -57.0, -9.0, -24.0]);
        lp.constrain(vec![0.5, -5.5, -2.5, 9.0], Relation::Le, 0.0)
            .constrain(vec![0.5, -1.5, -0.5, 1.0], Relation::Le, 0.0)
            .constrain(vec![1.0, 0.0, 0.0, 0.0], Relation::Le, 1.0);
        let s = lp_solve(&lp).unwrap();
        assert!((s.objective - 1.0).abs() < 1e-9);
        assert!(s.duality_gap < 1e-9);
    }
}
