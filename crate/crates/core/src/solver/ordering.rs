//! Reverse Cuthill-McKee ordering.

use std::collections::VecDeque;

use crate::sparse::CsrMatrix;

/// Returns `perm` with `perm[new] = old`. Each connected component is started
/// from a pseudo-peripheral node; neighbors are visited by increasing degree,
/// ties by index.
pub fn reverse_cuthill_mckee(a: &CsrMatrix) -> Vec<usize> {
    let n = a.n_rows();
    let neighbors = |i: usize| a.row(i).0.iter().copied().filter(move |&j| j != i);
    let degree: Vec<usize> = (0..n).map(|i| neighbors(i).count()).collect();
    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut level = vec![usize::MAX; n];

    for seed in 0..n {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &neighbors, &degree, &mut level);
        let mut queue = VecDeque::from([start]);
        visited[start] = true;
        while let Some(i) = queue.pop_front() {
            order.push(i);
            let mut next: Vec<usize> = neighbors(i).filter(|&j| !visited[j]).collect();
            next.sort_by_key(|&j| (degree[j], j));
            for j in next {
                visited[j] = true;
                queue.push_back(j);
            }
        }
    }
    order.reverse();
    order
}

/// George-Liu search: repeatedly restart the BFS from a minimum-degree node of
/// the last level until the eccentricity stops growing.
fn pseudo_peripheral<F, I>(seed: usize, neighbors: &F, degree: &[usize], level: &mut [usize]) -> usize
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let mut root = seed;
    let mut eccentricity = bfs_levels(root, neighbors, level).0;
    loop {
        let (_, last) = bfs_levels(root, neighbors, level);
        let candidate = *last.iter().min_by_key(|&&j| (degree[j], j)).expect("nonempty level");
        let (ecc, _) = bfs_levels(candidate, neighbors, level);
        if ecc > eccentricity {
            root = candidate;
            eccentricity = ecc;
        } else {
            return root;
        }
    }
}

fn bfs_levels<F, I>(root: usize, neighbors: &F, level: &mut [usize]) -> (usize, Vec<usize>)
where
    F: Fn(usize) -> I,
    I: Iterator<Item = usize>,
{
    let mut seen = vec![root];
    level[root] = 0;
    let mut frontier = vec![root];
    let mut depth = 0;
    loop {
        let mut next = Vec::new();
        for &i in &frontier {
            for j in neighbors(i) {
                if level[j] == usize::MAX {
                    level[j] = depth + 1;
                    next.push(j);
                    seen.push(j);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
        depth += 1;
    }
    for &i in &seen {
        level[i] = usize::MAX;
    }
    (depth, frontier)
}

/// Largest `|i - j|` over the nonzeros of `a`.
pub fn bandwidth(a: &CsrMatrix) -> usize {
    (0..a.n_rows()).flat_map(|i| a.row(i).0.iter().map(move |&j| i.abs_diff(j))).max().unwrap_or(0)
}
