//! Brute-force usefulness fixed point over an index-based network, written
//! straight from the formulas with plain arrays.
//!
//! Per round, from user scores U and effective scores E of the last round:
//!   w(u)      = max(0.01, U(u)^0.5)
//!   direct(s) = sum w(u) v(u,s) / sum w(u) over veracity raters of s, else 0
//!   valid(l)  = clamp01(1 - 0.5 * sum max(0, E(m)) over objections m on l)
//!   E'(s)     = clamp(-1, 1, direct(s) + 0.5 * sum_args max(0,E(a)) valid
//!                                     - 0.5 * sum_objs max(0,E(o)) valid)
//!   U'(u)     = 0.8 (1 + mean E'(own statements)) / 2 + 0.2 min(1, given(u)/10)
//! starting from U = 0.5, E = 0, until max |change| < tol.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Target {
    Statement(usize),
    Link(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Link {
    pub supports: bool,
    pub source: usize,
    pub target: Target,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Net {
    pub users: usize,
    /// Owner of each statement.
    pub owner: Vec<usize>,
    /// (rater, statement, value), one per pair.
    pub veracity: Vec<(usize, usize, f64)>,
    /// Ratings given per user over every criterion.
    pub given: Vec<usize>,
    pub links: Vec<Link>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub effective: Vec<f64>,
    pub user: Vec<f64>,
    pub rounds: usize,
    pub converged: bool,
}

pub fn solve(net: &Net, max_rounds: usize, tol: f64) -> Solution {
    let n = net.owner.len();
    let mut e = vec![0.0f64; n];
    let mut u = vec![0.5f64; net.users];
    let mut rounds = 0;
    let mut converged = false;
    while rounds < max_rounds {
        rounds += 1;
        let mut e2 = vec![0.0f64; n];
        for s in 0..n {
            let mut top = 0.0;
            let mut bottom = 0.0;
            for &(r, t, v) in &net.veracity {
                if t == s {
                    let w = u[r].sqrt().max(0.01);
                    top += w * v;
                    bottom += w;
                }
            }
            let mut x = if bottom > 0.0 { top / bottom } else { 0.0 };
            for (li, l) in net.links.iter().enumerate() {
                if l.target != Target::Statement(s) {
                    continue;
                }
                let mut attack = 0.0;
                for m in &net.links {
                    if !m.supports && m.target == Target::Link(li) {
                        attack += e[m.source].max(0.0);
                    }
                }
                let valid = (1.0 - 0.5 * attack).clamp(0.0, 1.0);
                let c = 0.5 * e[l.source].max(0.0) * valid;
                if l.supports {
                    x += c;
                } else {
                    x -= c;
                }
            }
            e2[s] = x.clamp(-1.0, 1.0);
        }
        let mut u2 = vec![0.0f64; net.users];
        for user in 0..net.users {
            let own: Vec<f64> = (0..n).filter(|&s| net.owner[s] == user).map(|s| e2[s]).collect();
            let mean = if own.is_empty() {
                0.0
            } else {
                own.iter().sum::<f64>() / own.len() as f64
            };
            let given = net.given.get(user).copied().unwrap_or(0) as f64;
            u2[user] = (0.8 * (1.0 + mean) / 2.0 + 0.2 * (given / 10.0).min(1.0)).clamp(0.0, 1.0);
        }
        let mut delta = 0.0f64;
        for s in 0..n {
            delta = delta.max((e2[s] - e[s]).abs());
        }
        for user in 0..net.users {
            delta = delta.max((u2[user] - u[user]).abs());
        }
        e = e2;
        u = u2;
        if delta < tol {
            converged = true;
            break;
        }
    }
    Solution {
        effective: e,
        user: u,
        rounds,
        converged,
    }
}
