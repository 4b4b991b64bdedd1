//! Bounded breadth-first search over rule applications, used to check
//! steps the learner types in.

use std::collections::HashSet;

use crate::par::Exec;
use crate::rewrite::{apply_rule, Env, Justification, RewriteRule};
use crate::term::{all_paths, Path, Term};

/// Frontier size beyond which the search gives up on a level.
pub const MAX_FRONTIER: usize = 50_000;

/// Every single-rule successor of `t`, in rule order then preorder path
/// order. Rules with context variables are tried with each of `contexts`.
pub fn successors(rules: &[RewriteRule], t: &Term, base: &Env, contexts: &[Env]) -> Vec<(Term, Justification)> {
    let paths = all_paths(t);
    let mut out = Vec::new();
    for r in rules {
        let envs: Vec<&Env> = if r.context.is_empty() { vec![base] } else { contexts.iter().collect() };
        for p in &paths {
            for env in &envs {
                if let Ok(step) = apply_rule(r, t, p, env) {
                    out.push(step);
                }
            }
        }
    }
    out
}

/// Shortest chain of at most `depth` rewrites from `start` to a term
/// satisfying `goal`. Ties are broken deterministically (first rule, then
/// first path), independent of `exec`.
pub fn search<G>(
    exec: Exec,
    rules: &[RewriteRule],
    start: &Term,
    base: &Env,
    contexts: &[Env],
    depth: usize,
    goal: G,
) -> Option<Vec<(Term, Justification)>>
where
    G: Fn(&Term) -> bool + Sync,
{
    let mut seen: HashSet<Term> = HashSet::from([start.clone()]);
    let mut frontier: Vec<(Term, Vec<(Term, Justification)>)> = vec![(start.clone(), Vec::new())];
    for _ in 0..depth {
        let expanded: Vec<Vec<(Term, Justification, bool)>> = exec.map(&frontier, |(t, _)| {
            successors(rules, t, base, contexts).into_iter().map(|(n, j)| {
                let hit = goal(&n);
                (n, j, hit)
            }).collect()
        });
        let mut next = Vec::new();
        for ((_, chain), succ) in frontier.iter().zip(expanded) {
            for (n, j, hit) in succ {
                if !seen.insert(n.clone()) {
                    continue;
                }
                let mut c = chain.clone();
                c.push((n.clone(), j));
                if hit {
                    return Some(c);
                }
                if next.len() < MAX_FRONTIER {
                    next.push((n, c));
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    None
}

/// Path of the first (preorder) position where `a` and `b` differ.
pub fn first_difference(a: &Term, b: &Term) -> Option<Path> {
    if a == b {
        return None;
    }
    let mut path = Vec::new();
    let (mut x, mut y) = (a, b);
    loop {
        let same_head = match (x, y) {
            (Term::Apply(o1, a1), Term::Apply(o2, a2)) => o1 == o2 && a1.len() == a2.len(),
            (Term::Binder(k1, n1, _), Term::Binder(k2, n2, _)) => k1 == k2 && n1 == n2,
            _ => false,
        };
        if !same_head {
            return Some(Path(path));
        }
        let i = (0..x.child_count()).find(|&i| x.child(i) != y.child(i))?;
        path.push(i);
        x = x.child(i).unwrap();
        y = y.child(i).unwrap();
    }
}
