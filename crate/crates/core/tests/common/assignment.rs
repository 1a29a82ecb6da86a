//! Exhaustive reference for the assignment problem.

/// Brute-force minimum over all injective maps of the smaller side.
pub fn brute_force(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost[0].len();
    fn go(cost: &[Vec<f64>], i: usize, used: &mut Vec<bool>, transpose: bool) -> f64 {
        let (n, m) = if transpose { (cost[0].len(), cost.len()) } else { (cost.len(), cost[0].len()) };
        if i == n {
            return 0.0;
        }
        let mut best = f64::INFINITY;
        for j in 0..m {
            if used[j] {
                continue;
            }
            used[j] = true;
            let c = if transpose { cost[j][i] } else { cost[i][j] };
            best = best.min(c + go(cost, i + 1, used, transpose));
            used[j] = false;
        }
        best
    }
    let transpose = rows > cols;
    go(cost, 0, &mut vec![false; rows.max(cols)], transpose)
}

