use rand::Rng;
use rand_distr::StandardNormal;

/// Draws per-node load fractions around the area means.
///
/// Each node's shares are sampled from `N(mean, sigma)` and truncated to
/// `[0, 1]`; components with zero mean stay zero. Iterative proportional
/// fitting then restores both constraints at once: every node's shares sum
/// to one, and the kW-weighted area totals equal the means, so area-level
/// figures such as A/C kW are unaffected by the draw.
pub fn draw_node_fractions<R: Rng + ?Sized, const K: usize>(
    means: [f64; K],
    weights: &[f64],
    sigma: f64,
    rng: &mut R,
) -> Vec<[f64; K]> {
    let total: f64 = weights.iter().sum();
    let mut rows: Vec<[f64; K]> = weights
        .iter()
        .map(|_| {
            let mut row = [0.0; K];
            for (r, &m) in row.iter_mut().zip(&means) {
                if m > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    // keep a positive floor so the proportional fit can rescale
                    *r = (m + sigma * z).clamp(0.05 * m, 1.0);
                }
            }
            row
        })
        .collect();
    if !(total > 0.0) || sigma == 0.0 {
        return weights.iter().map(|_| means).collect();
    }
    for _ in 0..500 {
        for row in rows.iter_mut() {
            let s: f64 = row.iter().sum();
            row.iter_mut().for_each(|x| *x /= s);
        }
        let mut worst = 0.0f64;
        for k in 0..K {
            if means[k] == 0.0 {
                continue;
            }
            let col: f64 = rows.iter().zip(weights).map(|(r, w)| r[k] * w).sum::<f64>() / total;
            let f = means[k] / col;
            worst = worst.max((f - 1.0).abs());
            rows.iter_mut().for_each(|r| r[k] *= f);
        }
        if worst < 1e-13 {
            break;
        }
    }
    for row in rows.iter_mut() {
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|x| *x /= s);
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn preserves_row_and_area_sums() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let means = [0.47, 0.0, 0.53, 0.0];
        let w = [42.0, 85.0, 42.0, 140.0, 126.0, 42.0];
        let rows = draw_node_fractions(means, &w, 0.05, &mut rng);
        let total: f64 = w.iter().sum();
        for r in &rows {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert_eq!(r[1], 0.0);
            assert_eq!(r[3], 0.0);
        }
        for k in 0..4 {
            let col: f64 = rows.iter().zip(&w).map(|(r, w)| r[k] * w).sum::<f64>() / total;
            assert!((col - means[k]).abs() < 1e-9, "{k}: {col}");
        }
        // the draw actually varies across nodes
        assert!(rows.iter().any(|r| (r[2] - 0.53).abs() > 1e-3));
    }

    #[test]
    fn zero_sigma_returns_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rows = draw_node_fractions([0.2, 0.1, 0.7], &[1.0, 2.0], 0.0, &mut rng);
        assert_eq!(rows, vec![[0.2, 0.1, 0.7]; 2]);
    }

    #[test]
    fn same_seed_same_draw() {
        let a = draw_node_fractions([0.5, 0.5], &[1.0, 1.0, 3.0], 0.05, &mut ChaCha8Rng::seed_from_u64(3));
        let b = draw_node_fractions([0.5, 0.5], &[1.0, 1.0, 3.0], 0.05, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(a, b);
    }
}
