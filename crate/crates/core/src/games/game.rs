use serde::{Deserialize, Serialize};

use super::lp::{lp_solve, LinearProgram, Relation};
use crate::error::{Result, SqError};

/// Payoff table; the row player maximizes, the column player minimizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameMatrix {
    rows: usize,
    cols: usize,
    payoff: Vec<f64>,
}

impl GameMatrix {
    pub fn new(rows: usize, cols: usize, payoff: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 || payoff.len() != rows * cols {
            return Err(SqError::InvalidArgument(format!(
                "game matrix {rows}x{cols} needs {} finite entries, got {}",
                rows * cols,
                payoff.len()
            )));
        }
        if payoff.iter().any(|v| !v.is_finite()) {
            return Err(SqError::InvalidArgument("game payoffs must be finite".into()));
        }
        Ok(GameMatrix { rows, cols, payoff })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(SqError::InvalidArgument("ragged game matrix".into()));
        }
        GameMatrix::new(rows.len(), cols, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.payoff[i * self.cols + j]
    }

    /// `−Aᵀ`: the same game with the roles of the players exchanged.
    pub fn negated_transpose(&self) -> GameMatrix {
        let mut payoff = vec![0.0; self.payoff.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                payoff[j * self.rows + i] = -self.get(i, j);
            }
        }
        GameMatrix { rows: self.cols, cols: self.rows, payoff }
    }

    /// Worst case for a row strategy: `min_j Σ_i x_i A_ij`.
    pub fn row_guarantee(&self, x: &[f64]) -> f64 {
        (0..self.cols)
            .map(|j| (0..self.rows).map(|i| x[i] * self.get(i, j)).sum::<f64>())
            .fold(f64::INFINITY, f64::min)
    }

    /// Worst case for a column strategy: `max_i Σ_j A_ij y_j`.
    pub fn col_guarantee(&self, y: &[f64]) -> f64 {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j) * y[j]).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroSumSolution {
    pub value: f64,
    pub row_strategy: Vec<f64>,
    pub col_strategy: Vec<f64>,
}

/// Value and optimal mixed strategies, from two independently solved LPs.
pub fn zero_sum(game: &GameMatrix) -> Result<ZeroSumSolution> {
    let (m, n) = (game.rows, game.cols);

    // Row player: max v s.t. Σ_i x_i A_ij ≥ v, Σ x = 1.
    let mut obj = vec![0.0; m + 1];
    obj[m] = 1.0;
    let mut lp = LinearProgram::maximize(obj);
    lp.bound(m, f64::NEG_INFINITY, f64::INFINITY);
    for j in 0..n {
        let mut row: Vec<f64> = (0..m).map(|i| -game.get(i, j)).collect();
        row.push(1.0);
        lp.constrain(row, Relation::Le, 0.0);
    }
    let mut simplex = vec![1.0; m];
    simplex.push(0.0);
    lp.constrain(simplex, Relation::Eq, 1.0);
    let row_sol = lp_solve(&lp)?;

    // Column player: max −w s.t. Σ_j A_ij y_j ≤ w, Σ y = 1.
    let mut obj = vec![0.0; n + 1];
    obj[n] = -1.0;
    let mut lp = LinearProgram::maximize(obj);
    lp.bound(n, f64::NEG_INFINITY, f64::INFINITY);
    for i in 0..m {
        let mut row: Vec<f64> = (0..n).map(|j| game.get(i, j)).collect();
        row.push(-1.0);
        lp.constrain(row, Relation::Le, 0.0);
    }
    let mut simplex = vec![1.0; n];
    simplex.push(0.0);
    lp.constrain(simplex, Relation::Eq, 1.0);
    let col_sol = lp_solve(&lp)?;

    let row_strategy = clean_simplex(&row_sol.x[..m]);
    let col_strategy = clean_simplex(&col_sol.x[..n]);
    let v = row_sol.objective;
    let w = -col_sol.objective;
    if (v - w).abs() > 1e-7 * (1.0 + v.abs()) {
        return Err(SqError::VerificationFailed(format!("game values disagree: {v} vs {w}")));
    }
    Ok(ZeroSumSolution { value: v, row_strategy, col_strategy })
}

fn clean_simplex(x: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let s: f64 = clipped.iter().sum();
    clipped.into_iter().map(|v| v / s).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matching_pennies() {
        let g = GameMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        let s = zero_sum(&g).unwrap();
        assert!(s.value.abs() < 1e-12);
        assert!((s.row_strategy[0] - 0.5).abs() < 1e-12);
        assert!((s.col_strategy[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn saddle_point() {
        let g = GameMatrix::from_rows(&[vec![3.0, 1.0, 4.0], vec![2.0, 0.0, 5.0]]).unwrap();
        let s = zero_sum(&g).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert!(g.row_guarantee(&s.row_strategy) >= s.value - 1e-9);
        assert!(g.col_guarantee(&s.col_strategy) <= s.value + 1e-9);
    }
}
