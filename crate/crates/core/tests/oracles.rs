//! Comparisons against independent brute-force computations.

mod common;

use std::collections::{BTreeMap, BTreeSet};

use cascadepred::cascade::{early_stage, frontier_split, surfaces, Adoption, Cascade};
use cascadepred::community::{louvain, modularity, CommunityAssignment};
use cascadepred::eval::regression_metrics;
use cascadepred::features::{features_a, features_b, community_features, shared_communities};
use cascadepred::graph::NodeId;
use cascadepred::ml::{
    fit_linear_regression, fit_logistic_regression, fit_tree, kfold_split, logistic_loss, predict, Dataset, Model, Task,
    TreeNode,
};
use cascadepred::pointprocess::{
    fit_theta_powerlaw, kernel_from_theta, reaction_times, rpp_predict, rpp_profile_alpha, seismic_fit_marked,
    seismic_predict, relaxation_density, RppFit,
};
use common::*;
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, LogNormal};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[test]
fn out_neighbors_match_adjacency_rows() {
    let mut r = rng(1);
    for _ in 0..20 {
        let n = 50;
        let arcs = random_arcs(n, 0.08, &mut r);
        let g = graph(n, &arcs);
        let mut m = vec![vec![false; n]; n];
        for &(u, v) in &arcs {
            m[u as usize][v as usize] = true;
        }
        for u in 0..n {
            let want: Vec<NodeId> = (0..n).filter(|&v| m[u][v]).map(|v| v as NodeId).collect();
            assert_eq!(g.out_neighbors(u as NodeId).unwrap(), want.as_slice());
            let want_in: Vec<NodeId> = (0..n).filter(|&v| m[v][u]).map(|v| v as NodeId).collect();
            assert_eq!(g.in_neighbors(u as NodeId).unwrap(), want_in.as_slice());
        }
        let total: usize = (0..n).map(|v| g.out_degree(v as NodeId).unwrap()).sum();
        assert_eq!(total, g.edge_count());
        let mean = total as f64 / n as f64;
        assert!((mean - g.edge_count() as f64 / n as f64).abs() < 1e-12);
    }
}

/// Newman modularity by summing over all node pairs.
fn modularity_pairs(adj: &[Vec<bool>], labels: &[u32]) -> f64 {
    let n = adj.len();
    let deg: Vec<f64> = adj.iter().map(|r| r.iter().filter(|&&x| x).count() as f64).collect();
    let two_m: f64 = deg.iter().sum();
    let mut q = 0.0;
    for i in 0..n {
        for j in 0..n {
            if labels[i] == labels[j] {
                let a = if adj[i][j] { 1.0 } else { 0.0 };
                q += a - deg[i] * deg[j] / two_m;
            }
        }
    }
    q / two_m
}

#[test]
fn modularity_matches_pair_sum() {
    let mut r = rng(2);
    for _ in 0..50 {
        let n = r.gen_range(4..40);
        let arcs = random_connected_arcs(n, 0.1, &mut r);
        let g = graph(n, &arcs);
        let adj = undirected_matrix(n, &arcs);
        let k = r.gen_range(1..6);
        let labels: Vec<u32> = (0..n).map(|_| r.gen_range(0..k)).collect();
        let q = modularity(&g, &labels);
        assert!((q - modularity_pairs(&adj, &labels)).abs() < 1e-12);
        assert!((-0.5..=1.0).contains(&q));
        // Relabeling communities leaves Q unchanged.
        let shifted: Vec<u32> = labels.iter().map(|&c| (k - 1 - c) * 7 + 3).collect();
        assert!((modularity(&g, &shifted) - q).abs() < 1e-12);
        let a = CommunityAssignment::from_labels(&g, &labels).unwrap();
        assert!((a.modularity() - q).abs() < 1e-9);
    }
}

#[test]
fn two_clique_split_matches_hand_count() {
    let mut arcs = Vec::new();
    for base in [0u32, 5] {
        for i in 0..5 {
            for j in i + 1..5 {
                arcs.push((base + i, base + j));
            }
        }
    }
    arcs.push((4, 5));
    let g = graph(10, &arcs);
    let labels: Vec<u32> = (0..10).map(|v| (v / 5) as u32).collect();
    // 21 edges; each side holds 10 internal edges and degree mass 21.
    let want = 2.0 * (10.0 / 21.0 - (21.0f64 / 42.0).powi(2));
    assert!((modularity(&g, &labels) - want).abs() < 1e-12);
    let found = louvain(&g, 0, 10, 10);
    assert_eq!(found.community_count(), 2);
    assert!((found.modularity() - want).abs() < 1e-12);
}

/// Exact maximum modularity by dynamic programming over vertex subsets.
fn best_modularity(adj: &[Vec<bool>]) -> f64 {
    let n = adj.len();
    let full = (1usize << n) - 1;
    let deg: Vec<f64> = adj.iter().map(|r| r.iter().filter(|&&x| x).count() as f64).collect();
    let m: f64 = deg.iter().sum::<f64>() / 2.0;
    // Internal edges and degree mass of every subset, built from the subset
    // without its lowest node.
    let mut e = vec![0.0f64; full + 1];
    let mut dm = vec![0.0f64; full + 1];
    for s in 1..=full {
        let low = s.trailing_zeros() as usize;
        let rest = s & (s - 1);
        let links = (0..n).filter(|&v| rest >> v & 1 == 1 && adj[low][v]).count();
        e[s] = e[rest] + links as f64;
        dm[s] = dm[rest] + deg[low];
    }
    let score: Vec<f64> = (0..=full).map(|s| e[s] / m - (dm[s] / (2.0 * m)).powi(2)).collect();
    let mut best = vec![f64::NEG_INFINITY; full + 1];
    best[0] = 0.0;
    for s in 1..=full {
        let low = s & s.wrapping_neg();
        let rest = s ^ low;
        // Enumerate subsets T of `rest`; the block is T plus the lowest node.
        let mut t = rest;
        loop {
            let block = t | low;
            let v = score[block] + best[s ^ block];
            if v > best[s] {
                best[s] = v;
            }
            if t == 0 {
                break;
            }
            t = (t - 1) & rest;
        }
    }
    best[full]
}

#[test]
fn louvain_near_exhaustive_optimum_on_ring_of_cliques() {
    let mut arcs = Vec::new();
    for c in 0..4u32 {
        let base = 4 * c;
        for i in 0..4 {
            for j in i + 1..4 {
                arcs.push((base + i, base + j));
            }
        }
        arcs.push((base + 3, (base + 4) % 16));
    }
    let g = graph(16, &arcs);
    let adj = undirected_matrix(16, &arcs);
    let opt = best_modularity(&adj);
    let found = louvain(&g, 7, 10, 10);
    assert!(found.modularity() >= opt - 0.02, "louvain {} vs optimum {opt}", found.modularity());
    assert!(found.modularity() <= opt + 1e-12);
    assert!((found.modularity() - modularity_pairs(&adj, found.mapping())).abs() < 1e-12);
}

/// Two-hop surfaces from the definition, with `arcs[(u, v)]` meaning v follows u.
fn surfaces_oracle(n: usize, arcs: &[(NodeId, NodeId)], adopters: &[(usize, f64)]) -> (BTreeMap<usize, f64>, BTreeSet<usize>) {
    let adopted: BTreeSet<usize> = adopters.iter().map(|a| a.0).collect();
    let mut f1: BTreeMap<usize, f64> = BTreeMap::new();
    for &(u, t) in adopters {
        for &(a, b) in arcs {
            let (a, b) = (a as usize, b as usize);
            if a == u && !adopted.contains(&b) {
                let e = f1.entry(b).or_insert(t);
                *e = e.min(t);
            }
        }
    }
    let mut f2 = BTreeSet::new();
    for &(a, b) in arcs {
        let (a, b) = (a as usize, b as usize);
        if f1.contains_key(&a) && !adopted.contains(&b) && !f1.contains_key(&b) && b < n {
            f2.insert(b);
        }
    }
    (f1, f2)
}

#[test]
fn surfaces_and_frontiers_match_definitions() {
    let mut r = rng(3);
    for _ in 0..50 {
        let n = r.gen_range(5..50);
        let arcs = random_arcs(n, 0.08, &mut r);
        let g = graph(n, &arcs);
        let len = r.gen_range(1..=n.min(12));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        order.truncate(len);
        let mut times: Vec<f64> = (0..len).map(|_| r.gen_range(0.0..100.0)).collect();
        times.sort_by(f64::total_cmp);
        times[0] = 0.0;
        let c = cascade_from("c", &order, &times);
        let es = early_stage(&c, len).unwrap();
        let s = surfaces(&es, &g);
        let pairs: Vec<(usize, f64)> = order.iter().copied().zip(times.iter().copied()).collect();
        let (f1, f2) = surfaces_oracle(n, &arcs, &pairs);
        let got_f1: Vec<usize> = s.first_surface.iter().map(|&v| v as usize).collect();
        assert_eq!(got_f1, f1.keys().copied().collect::<Vec<_>>());
        for (v, t) in s.first_surface.iter().zip(&s.exposure_time) {
            assert_eq!(*t, f1[&(*v as usize)]);
        }
        let got_f2: Vec<usize> = s.second_surface.iter().map(|&v| v as usize).collect();
        assert_eq!(got_f2, f2.iter().copied().collect::<Vec<_>>());

        let t_lambda = r.gen_range(0.0..60.0);
        let fs = frontier_split(&s, es.t_obs, t_lambda).unwrap();
        for (&v, &t) in &f1 {
            let is_frontier = es.t_obs - t <= t_lambda;
            assert_eq!(fs.frontiers.contains(&(v as NodeId)), is_frontier);
            assert_eq!(fs.non_adopters.contains(&(v as NodeId)), !is_frontier);
        }
    }
}

#[test]
fn reaction_times_match_per_node_recount() {
    let mut r = rng(4);
    let n = 40;
    let arcs = random_arcs(n, 0.1, &mut r);
    let g = graph(n, &arcs);
    let mut corpus = Vec::new();
    let mut want = Vec::new();
    for ci in 0..10 {
        let len = r.gen_range(2..15);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        order.truncate(len);
        let mut times: Vec<f64> = (0..len).map(|_| r.gen_range(0.0..1000.0f64).round()).collect();
        times.sort_by(f64::total_cmp);
        times[0] = 0.0;
        for i in 1..len {
            let v = order[i];
            let followees: Vec<f64> = (0..len)
                .filter(|&j| arcs.contains(&(order[j] as NodeId, v as NodeId)) && times[j] <= times[i])
                .map(|j| times[j])
                .collect();
            let since = followees.into_iter().fold(f64::INFINITY, f64::min);
            let delay = if since.is_finite() { times[i] - since } else { times[i] };
            if delay > 0.0 {
                want.push(delay);
            }
        }
        corpus.push(cascade_from(&format!("c{ci}"), &order, &times));
    }
    let mut got = reaction_times(&corpus, &g);
    got.sort_by(f64::total_cmp);
    want.sort_by(f64::total_cmp);
    assert_eq!(got, want);
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

fn cv(v: &[f64]) -> f64 {
    let m = mean(v);
    if m == 0.0 {
        return 0.0;
    }
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
    var.sqrt() / m
}

#[test]
fn feature_vectors_match_per_feature_formulas() {
    let mut r = rng(5);
    for _ in 0..30 {
        let n = r.gen_range(10..50);
        let arcs = random_arcs(n, 0.1, &mut r);
        let g = graph(n, &arcs);
        let adj = undirected_matrix(n, &arcs);
        let labels: Vec<u32> = (0..n).map(|_| r.gen_range(0..4)).collect();
        let assign = CommunityAssignment::from_labels(&g, &labels).unwrap();
        let len = r.gen_range(2..=n.min(10));
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut r);
        order.truncate(len);
        let mut times: Vec<f64> = (0..len).map(|_| r.gen_range(0.0..50.0)).collect();
        times.sort_by(f64::total_cmp);
        times[0] = 0.0;
        let es = early_stage(&cascade_from("c", &order, &times), len).unwrap();
        let s = surfaces(&es, &g);
        let fs = frontier_split(&s, es.t_obs, 10.0).unwrap();

        let lab = |set: &[NodeId]| set.iter().map(|&v| labels[v as usize]).collect::<Vec<_>>();
        let groups = [s.adopters.clone(), fs.frontiers.clone(), fs.non_adopters.clone()];
        let mut block = Vec::new();
        for grp in &groups {
            let (k, h, gi) = community_oracle(&lab(grp));
            block.extend([k as f64, h, gi]);
        }
        for (a, b) in [(0, 1), (0, 2), (1, 2)] {
            let ca: BTreeSet<u32> = lab(&groups[a]).into_iter().collect();
            let cb: BTreeSet<u32> = lab(&groups[b]).into_iter().collect();
            block.push(ca.intersection(&cb).count() as f64);
            assert_eq!(shared_communities(&groups[a], &groups[b], &assign), ca.intersection(&cb).count());
        }
        let cs = community_features(&s.adopters, &assign);
        assert_eq!(cs.count as f64, block[0]);

        let fa = features_a(&es, &s, &fs, &assign);
        let mut want_a = block.clone();
        want_a.push(mean(&times));
        assert_eq!(fa.values.len(), 13);
        for (i, (x, y)) in fa.values.iter().zip(&want_a).enumerate() {
            assert!((x - y).abs() < 1e-12, "A[{i}]: {x} vs {y}");
        }

        let cap = 5;
        let steps: Vec<f64> = order
            .windows(2)
            .map(|w| match bfs_distance(&adj, w[0], w[1]) {
                Some(d) if d <= cap => d as f64,
                _ => (cap + 1) as f64,
            })
            .collect();
        let gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
        let mut want_b = vec![
            s.first_surface.len() as f64,
            s.second_surface.len() as f64,
            mean(&steps),
            cv(&steps),
            induced_diameter(&adj, &order) as f64,
        ];
        want_b.extend(&block);
        want_b.extend([mean(&gaps), cv(&gaps)]);
        let fb = features_b(&es, &s, &fs, &assign, &g, cap as u32);
        assert_eq!(fb.values.len(), 19);
        for (i, (x, y)) in fb.values.iter().zip(&want_b).enumerate() {
            assert!((x - y).abs() < 1e-12, "B[{i}]: {x} vs {y}");
        }
    }
}

#[test]
fn kernel_integrals_match_quadrature() {
    for (theta, s0) in [(0.2, 1.0), (0.44, 300.0), (0.282, 30000.0), (1.5, 60.0), (3.0, 5.0)] {
        let k = kernel_from_theta(theta, s0).unwrap();
        // Log-substituted Simpson over the power-law part.
        let power = |a: f64, b: f64| simpson(|u: f64| k.density(u.exp()) * u.exp(), a.ln(), b.ln(), 20_000);
        let head = simpson(|s| k.density(s), 0.0, s0, 2);
        let within = head + power(s0, 1e9 * s0);
        assert!((within - k.integral_to(1e9 * s0)).abs() < 1e-9, "theta {theta}");
        // Far enough out that the remaining mass is below 1e-12.
        let far = s0 * (28.0 * std::f64::consts::LN_10 / theta).exp();
        let total = head + power(s0, far);
        assert!((total - 1.0).abs() < 1e-6, "theta {theta}: {total}");
        for a in [0.0, 0.3 * s0, s0, 2.0 * s0, 1e3 * s0] {
            let tail = if a < s0 {
                simpson(|s| k.density(s), a, s0, 2) + power(s0, far)
            } else {
                power(a, far)
            };
            assert!((tail - k.tail(a)).abs() < 1e-9, "theta {theta}, a {a}: {tail} vs {}", k.tail(a));
        }
    }
}

#[test]
fn power_law_fit_recovers_inverse_cdf_samples() {
    let mut r = rng(6);
    let (theta, s0) = (0.44, 300.0);
    let samples: Vec<f64> = (0..100_000).map(|_| s0 * (1.0 - r.gen::<f64>()).powf(-1.0 / theta)).collect();
    let fit = fit_theta_powerlaw(&samples, s0).unwrap();
    assert!(rel_err(fit, theta) < 0.02, "{fit}");
}

#[test]
fn seismic_prediction_matches_intensity_quadrature() {
    let mut r = rng(7);
    for _ in 0..20 {
        let theta = r.gen_range(0.2..1.5);
        let s0 = r.gen_range(10.0..500.0);
        let k = kernel_from_theta(theta, s0).unwrap();
        let n = r.gen_range(2..30);
        let mut times: Vec<f64> = (0..n).map(|_| r.gen_range(0.0..5.0 * s0)).collect();
        times.sort_by(f64::total_cmp);
        times[0] = 0.0;
        let marks: Vec<f64> = (0..n).map(|_| r.gen_range(0..200) as f64).collect();
        let t_obs = times[n - 1] + r.gen_range(0.0..s0);
        let Ok(fit) = seismic_fit_marked("c", times.clone(), marks.clone(), t_obs, &k) else {
            continue;
        };
        let t_prime = t_obs * r.gen_range(1.5..10.0);
        let lambda = |t: f64| fit.p_hat * times.iter().zip(&marks).map(|(&ti, &m)| m * k.density(t - ti)).sum::<f64>();
        let steps = 200_000;
        let h = (t_prime - t_obs) / steps as f64;
        let mut integral = 0.5 * (lambda(t_obs) + lambda(t_prime));
        for i in 1..steps {
            integral += lambda(t_obs + i as f64 * h);
        }
        integral *= h;
        let want = n as f64 + integral;
        let got = seismic_predict(&fit, &k, t_prime);
        assert!(rel_err(got, want) < 1e-4, "{got} vs {want}");
    }
}

#[test]
fn rpp_prediction_matches_forward_euler() {
    let mut r = rng(8);
    for i in 0..50 {
        let fit = RppFit {
            cascade_id: format!("r{i}"),
            alpha: r.gen_range(0.5..5.0),
            mu: r.gen_range(-1.0..3.0),
            sigma: r.gen_range(0.3..2.0),
            t_obs: r.gen_range(0.5..10.0),
            observed_size: r.gen_range(3..100),
            converged: true,
            iterations: 1,
            log_likelihood: 0.0,
        };
        let t_prime = fit.t_obs * r.gen_range(1.0..10.0);
        let h = fit.t_obs / 1e4;
        let steps = ((t_prime - fit.t_obs) / h).ceil() as usize;
        let mut size = fit.observed_size as f64;
        for s in 0..steps {
            let t = fit.t_obs + s as f64 * h;
            let dt = h.min(t_prime - t);
            size += dt * fit.alpha * relaxation_density(t, fit.mu, fit.sigma) * size;
        }
        let got = rpp_predict(&fit, t_prime);
        assert!(rel_err(got, size) < 0.005, "{got} vs {size}");
    }
}

#[test]
fn rpp_profile_alpha_matches_lognormal_cdf_sum() {
    let mut r = rng(9);
    for _ in 0..30 {
        let n = r.gen_range(3..40);
        let mut times: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..20.0)).collect();
        times.sort_by(f64::total_cmp);
        times[0] = 0.0;
        let c = Cascade::new("c", times.iter().enumerate().map(|(i, &t)| Adoption::new(i.to_string(), t)).collect());
        let es = early_stage(&c, n).unwrap();
        let (mu, sigma) = (r.gen_range(-1.0..3.0), r.gen_range(0.2..3.0));
        let ln = LogNormal::new(mu, sigma).unwrap();
        let cdf = |t: f64| if t <= 0.0 { 0.0 } else { ln.cdf(t) };
        let post: Vec<f64> = times.iter().copied().filter(|&t| t > 0.0).collect();
        let roots = n - post.len();
        let mut denom = 0.0;
        let mut count = roots as f64;
        let mut prev = 0.0;
        for &t in &post {
            denom += count * (cdf(t) - cdf(prev));
            count += 1.0;
            prev = t;
        }
        let want = post.len() as f64 / denom;
        let got = rpp_profile_alpha(&es, mu, sigma).unwrap();
        assert!(rel_err(got, want) < 1e-10, "{got} vs {want}");
    }
}

#[test]
fn linear_regression_matches_normal_equations() {
    let mut r = rng(10);
    for _ in 0..20 {
        let (m, d) = (r.gen_range(20..60), r.gen_range(1..5));
        let rows: Vec<Vec<f64>> = (0..m).map(|_| (0..d).map(|_| r.gen_range(-3.0..3.0)).collect()).collect();
        let y: Vec<f64> = rows.iter().map(|x| 1.0 + x.iter().sum::<f64>() + r.gen_range(-0.5..0.5)).collect();
        let ridge = if r.gen_bool(0.5) { 0.0 } else { r.gen_range(0.01..2.0) };
        let ds = Dataset::new(rows.clone(), y.clone(), (0..m).map(|i| i.to_string()).collect()).unwrap();
        let p = fit_linear_regression(&ds, ridge).unwrap();
        let (w, b) = p.coefficients().unwrap();
        // [X 1]^T [X 1] + diag(ridge, .., ridge, 0)
        let x = DMatrix::from_fn(m, d + 1, |i, j| if j < d { rows[i][j] } else { 1.0 });
        let mut a = x.transpose() * &x;
        for j in 0..d {
            a[(j, j)] += ridge;
        }
        let rhs = x.transpose() * DVector::from_vec(y.clone());
        let sol = a.lu().solve(&rhs).unwrap();
        for j in 0..d {
            assert!((w[j] - sol[j]).abs() < 1e-8);
        }
        assert!((b - sol[d]).abs() < 1e-8);
        // Residual orthogonality: X^T (y - y_hat) = ridge * w.
        let yhat = predict(&p, &rows).unwrap();
        for j in 0..d {
            let g: f64 = (0..m).map(|i| rows[i][j] * (y[i] - yhat[i])).sum();
            assert!((g - ridge * w[j]).abs() < 1e-6);
        }
    }
}

#[test]
fn logistic_regression_matches_gradient_descent() {
    let mut r = rng(11);
    for _ in 0..5 {
        let m = 30;
        let rows: Vec<Vec<f64>> = (0..m).map(|_| vec![r.gen_range(-2.0..2.0), r.gen_range(-2.0..2.0)]).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|x| if x[0] - 0.5 * x[1] + r.gen_range(-1.0..1.0) > 0.0 { 1.0 } else { 0.0 })
            .collect();
        let ds = Dataset::new(rows.clone(), y.clone(), (0..m).map(|i| i.to_string()).collect()).unwrap();
        let l2 = 1.0;
        let p = fit_logistic_regression(&ds, l2, 100, 1e-10).unwrap();
        let (w, b) = p.coefficients().unwrap();
        let got = logistic_loss(&ds, w, b, l2);
        // Plain gradient descent from zero.
        let mut th = [0.0f64; 3];
        for _ in 0..200_000 {
            let mut g = [0.0; 3];
            for (x, &t) in rows.iter().zip(&y) {
                let z = th[2] + th[0] * x[0] + th[1] * x[1];
                let e = 1.0 / (1.0 + (-z).exp()) - t;
                g[0] += e * x[0];
                g[1] += e * x[1];
                g[2] += e;
            }
            g[0] += l2 * th[0];
            g[1] += l2 * th[1];
            for j in 0..3 {
                th[j] -= 0.01 * g[j];
            }
        }
        let want = logistic_loss(&ds, &th[..2], th[2], l2);
        assert!((got - want).abs() < 1e-6, "{got} vs {want}");
    }
}

/// Best split by scanning every feature and midpoint, first-found wins ties.
fn best_split(rows: &[Vec<f64>], y: &[f64], idx: &[usize], task: Task) -> Option<(usize, f64)> {
    let cost = |set: &[usize]| -> f64 {
        if set.is_empty() {
            return 0.0;
        }
        let n = set.len() as f64;
        let mean = set.iter().map(|&i| y[i]).sum::<f64>() / n;
        match task {
            Task::Classification => n * 2.0 * mean * (1.0 - mean),
            Task::Regression => set.iter().map(|&i| (y[i] - mean).powi(2)).sum(),
        }
    };
    let parent = cost(idx);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..rows[0].len() {
        let vals: BTreeSet<u64> = idx.iter().map(|&i| rows[i][f].to_bits()).collect();
        let mut vals: Vec<f64> = vals.into_iter().map(f64::from_bits).collect();
        vals.sort_by(f64::total_cmp);
        for w in vals.windows(2) {
            let thr = 0.5 * (w[0] + w[1]);
            let (l, rr): (Vec<usize>, Vec<usize>) = idx.iter().partition(|&&i| rows[i][f] <= thr);
            let c = cost(&l) + cost(&rr);
            let bar = best.map_or(parent, |b| b.0);
            if c < bar - 1e-9 {
                best = Some((c, f, thr));
            }
        }
    }
    best.map(|b| (b.1, b.2))
}

fn tree_oracle(rows: &[Vec<f64>], y: &[f64], idx: Vec<usize>, depth: usize, task: Task, x: &[f64]) -> f64 {
    let leaf = idx.iter().map(|&i| y[i]).sum::<f64>() / idx.len() as f64;
    if depth == 0 || idx.len() < 2 {
        return leaf;
    }
    match best_split(rows, y, &idx, task) {
        None => leaf,
        Some((f, thr)) => {
            let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| rows[i][f] <= thr);
            if x[f] <= thr {
                tree_oracle(rows, y, l, depth - 1, task, x)
            } else {
                tree_oracle(rows, y, r, depth - 1, task, x)
            }
        }
    }
}

#[test]
fn depth_two_tree_matches_exhaustive_split_search() {
    let mut r = rng(12);
    for trial in 0..40 {
        let task = if trial % 2 == 0 { Task::Classification } else { Task::Regression };
        let rows: Vec<Vec<f64>> = (0..20).map(|_| (0..3).map(|_| r.gen_range(0..10) as f64 + r.gen::<f64>()).collect()).collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|x| match task {
                Task::Classification => f64::from(x[0] + r.gen_range(-3.0..3.0) > 5.0),
                Task::Regression => x[1] * 2.0 + r.gen_range(-1.0..1.0),
            })
            .collect();
        if task == Task::Classification && (y.iter().all(|&v| v == 1.0) || y.iter().all(|&v| v == 0.0)) {
            continue;
        }
        let ds = Dataset::new(rows.clone(), y.clone(), (0..20).map(|i| i.to_string()).collect()).unwrap();
        let p = fit_tree(&ds, 2, 1, 0, task).unwrap();
        let Model::Tree(tree) = &p.model else { panic!("not a tree") };
        assert!(tree.depth() <= 2);
        if let TreeNode::Split { feature, threshold, .. } = tree.nodes[0] {
            assert_eq!(Some((feature, threshold)), best_split(&rows, &y, &(0..20).collect::<Vec<_>>(), task));
        }
        let probes: Vec<Vec<f64>> = (0..50).map(|_| (0..3).map(|_| r.gen_range(0.0..11.0)).collect()).collect();
        let got = predict(&p, &probes).unwrap();
        for (x, g) in probes.iter().zip(&got) {
            let want = tree_oracle(&rows, &y, (0..20).collect(), 2, task, x);
            assert!((g - want).abs() < 1e-12, "trial {trial}: {g} vs {want}");
        }
    }
}

#[test]
fn kfold_partitions_pass_recount() {
    let mut r = rng(13);
    for _ in 0..50 {
        let m = r.gen_range(2..200);
        let k = r.gen_range(2..=m.min(12));
        let ids: Vec<String> = (0..m).map(|i| format!("id{i}")).collect();
        let labels: Vec<bool> = (0..m).map(|_| r.gen_bool(0.3)).collect();
        let strat = r.gen_bool(0.5);
        let folds = kfold_split(&ids, k, strat.then_some(labels.as_slice()), r.gen()).unwrap();
        let mut sizes = vec![0usize; k];
        let mut pos = vec![0usize; k];
        for (i, &f) in folds.iter().enumerate() {
            sizes[f] += 1;
            pos[f] += usize::from(labels[i]);
        }
        assert_eq!(sizes.iter().sum::<usize>(), m);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        if strat {
            assert!(pos.iter().max().unwrap() - pos.iter().min().unwrap() <= 1);
        }
    }
}

#[test]
fn coverage_is_rank_based() {
    let mut r = rng(14);
    for _ in 0..50 {
        let m = r.gen_range(10..100);
        let y: Vec<f64> = (0..m).map(|_| r.gen_range(50..500) as f64).collect();
        let yh: Vec<f64> = (0..m).map(|_| r.gen_range(1..600) as f64).collect();
        let ids: Vec<String> = (0..m).map(|i| format!("{i:03}")).collect();
        let base = regression_metrics(&y, &yh, &ids).unwrap().top10_coverage.unwrap();
        let warped: Vec<f64> = yh.iter().map(|v| v.powf(1.7) + 3.0 * v).collect();
        let again = regression_metrics(&y, &warped, &ids).unwrap().top10_coverage.unwrap();
        assert_eq!(base, again);
        assert_eq!(Some(base), regression_oracle(&y, &yh, &ids).3);
    }
}
