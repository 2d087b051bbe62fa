//! Sample lattices on boxes in `R^d`.

/// Uniform lattice with `points` nodes per axis on `[lo, hi]^d`,
/// enumerated in row-major order.
pub fn lattice(lo: f64, hi: f64, points: usize, dim: usize) -> Vec<Vec<f64>> {
    assert!(points >= 1);
    let total = points.pow(dim as u32);
    let mut out = Vec::with_capacity(total);
    let step = if points > 1 {
        (hi - lo) / (points - 1) as f64
    } else {
        0.0
    };
    for flat in 0..total {
        let mut idx = flat;
        let mut p = vec![0.0; dim];
        for coord in (0..dim).rev() {
            p[coord] = lo + step * (idx % points) as f64;
            idx /= points;
        }
        out.push(p);
    }
    out
}
