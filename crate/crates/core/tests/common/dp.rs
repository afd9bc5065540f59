//! Brute-force solver for small explicit MDPs: policy iteration with dense
//! Gaussian elimination. Shares no code with the crate's value iteration.

/// One outcome of an action: probability, reward, continuation weight
/// (0 for terminal) and successor (`None` means "worth `rmax`").
#[derive(Debug, Clone, Copy)]
pub struct Branch {
    pub p: f64,
    pub r: f64,
    pub cont: f64,
    pub next: Option<usize>,
}

/// `Fixed(q)` actions have a constant value (unknown or explore actions).
#[derive(Debug, Clone)]
pub enum Act {
    Fixed(f64),
    Branches(Vec<Branch>),
}

pub struct Mdp {
    pub actions: Vec<Vec<Act>>,
    pub gamma: f64,
    pub rmax: f64,
}

impl Mdp {
    fn q(&self, s: usize, a: usize, v: &[f64]) -> f64 {
        match &self.actions[s][a] {
            Act::Fixed(q) => *q,
            Act::Branches(bs) => bs
                .iter()
                .map(|b| b.p * (b.r + self.gamma * b.cont * b.next.map_or(self.rmax, |j| v[j])))
                .sum(),
        }
    }

    fn evaluate(&self, policy: &[Option<usize>]) -> Vec<f64> {
        let n = self.actions.len();
        let mut m = vec![vec![0.0; n + 1]; n];
        for s in 0..n {
            m[s][s] = 1.0;
            let Some(a) = policy[s] else { continue };
            match &self.actions[s][a] {
                Act::Fixed(q) => m[s][n] = *q,
                Act::Branches(bs) => {
                    for b in bs {
                        m[s][n] += b.p * b.r;
                        match b.next {
                            Some(j) => m[s][j] -= self.gamma * b.cont * b.p,
                            None => m[s][n] += self.gamma * b.cont * b.p * self.rmax,
                        }
                    }
                }
            }
        }
        gauss(m)
    }

    /// Optimal `Q` per state and action.
    pub fn solve(&self) -> Vec<Vec<f64>> {
        let n = self.actions.len();
        let mut policy: Vec<Option<usize>> = self
            .actions
            .iter()
            .map(|a| if a.is_empty() { None } else { Some(0) })
            .collect();
        for _ in 0..10_000 {
            let v = self.evaluate(&policy);
            let mut changed = false;
            for s in 0..n {
                let Some(cur) = policy[s] else { continue };
                let cur_q = self.q(s, cur, &v);
                for a in 0..self.actions[s].len() {
                    if self.q(s, a, &v) > cur_q + 1e-12 {
                        policy[s] = Some(a);
                        changed = true;
                        break;
                    }
                }
            }
            if !changed {
                return (0..n)
                    .map(|s| (0..self.actions[s].len()).map(|a| self.q(s, a, &v)).collect())
                    .collect();
            }
        }
        panic!("policy iteration did not converge");
    }
}

fn gauss(mut m: Vec<Vec<f64>>) -> Vec<f64> {
    let n = m.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        m.swap(col, piv);
        let d = m[col][col];
        assert!(d.abs() > 1e-12, "singular system");
        for k in col..=n {
            m[col][k] /= d;
        }
        for row in 0..n {
            if row != col && m[row][col] != 0.0 {
                let f = m[row][col];
                for k in col..=n {
                    m[row][k] -= f * m[col][k];
                }
            }
        }
    }
    m.into_iter().map(|r| r[n]).collect()
}
