use sgwalk::energy::{cell_values_of, JumpQuadrature};
use sgwalk::conductance::ConductanceParams;
fn main() {
    let alpha = ConductanceParams::alpha();
    for beta in [1.5f64, 1.8, 2.0, 2.5] {
        let mut vals = Vec::new();
        for level in 3..=7usize {
            let q = JumpQuadrature::new(level).unwrap();
            let u = cell_values_of(level, |x, _| x);
            vals.push(q.energy(&u, alpha + beta).unwrap());
        }
        let diffs: Vec<f64> = vals.windows(2).map(|w| w[1] - w[0]).collect();
        println!("beta {beta}: vals {vals:?}");
        println!("          diffs {diffs:?}");
    }
}
