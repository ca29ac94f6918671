//! Non-dominated sorting over loss vectors (all objectives minimized).

/// `a` dominates `b`: no worse everywhere and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x <= y) && a.iter().zip(b).any(|(x, y)| x < y)
}

/// Non-domination rank of every point (0 = Pareto front).
pub fn nondominated_ranks(points: &[Vec<f64>]) -> Vec<usize> {
    let n = points.len();
    let mut dominated_by = vec![0usize; n];
    let mut dominates_list: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            if i != j && dominates(&points[i], &points[j]) {
                dominates_list[i].push(j);
                dominated_by[j] += 1;
            }
        }
    }
    let mut rank = vec![usize::MAX; n];
    let mut current: Vec<usize> = (0..n).filter(|&i| dominated_by[i] == 0).collect();
    let mut r = 0;
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            rank[i] = r;
            for &j in &dominates_list[i] {
                dominated_by[j] -= 1;
                if dominated_by[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        current = next;
        r += 1;
    }
    rank
}

/// Crowding distance of each member of `front` (indices into `points`).
/// Boundary points get infinity.
pub fn crowding_distance(points: &[Vec<f64>], front: &[usize]) -> Vec<f64> {
    let m = front.len();
    let mut dist = vec![0.0; m];
    if m <= 2 {
        return vec![f64::INFINITY; m];
    }
    let n_obj = points[front[0]].len();
    for k in 0..n_obj {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| points[front[a]][k].total_cmp(&points[front[b]][k]).then(a.cmp(&b)));
        let lo = points[front[order[0]]][k];
        let hi = points[front[order[m - 1]]][k];
        dist[order[0]] = f64::INFINITY;
        dist[order[m - 1]] = f64::INFINITY;
        let span = hi - lo;
        if span <= 0.0 {
            continue;
        }
        for w in 1..m - 1 {
            let gap = points[front[order[w + 1]]][k] - points[front[order[w - 1]]][k];
            dist[order[w]] += gap / span;
        }
    }
    dist
}

/// Indices of the first `k` points when filling by ascending rank, then
/// descending crowding distance, then index.
pub fn select_best(points: &[Vec<f64>], k: usize) -> Vec<usize> {
    let ranks = nondominated_ranks(points);
    let max_rank = ranks.iter().copied().max().unwrap_or(0);
    let mut chosen = Vec::with_capacity(k);
    for r in 0..=max_rank {
        if chosen.len() >= k {
            break;
        }
        let front: Vec<usize> = (0..points.len()).filter(|&i| ranks[i] == r).collect();
        if chosen.len() + front.len() <= k {
            chosen.extend(&front);
            continue;
        }
        let cd = crowding_distance(points, &front);
        let mut order: Vec<usize> = (0..front.len()).collect();
        order.sort_by(|&a, &b| cd[b].total_cmp(&cd[a]).then(front[a].cmp(&front[b])));
        let need = k - chosen.len();
        chosen.extend(order.into_iter().take(need).map(|i| front[i]));
    }
    chosen
}
