//! Checks that the expected-reward gap between two policies is bounded by
//! their total variation distance, for rewards in [0, 1]. The check is done
//! in exact rational arithmetic.

use iad_core::metrics::gap_bound_check;

fn main() -> iad_core::error::Result<()> {
    // a sharpened policy that moves mass onto the high-reward outcome
    let base = [0.50, 0.30, 0.15, 0.05];
    let sharpened = [0.20, 0.30, 0.20, 0.30];
    let reward = [0.0, 0.4, 0.7, 1.0];

    let g = gap_bound_check(&sharpened, &base, &reward)?;
    println!("reward gap     {:.4}", g.delta_f64());
    println!("tv distance    {:.4}", g.tv_f64());
    println!("bound holds    {}", g.holds);

    // equality: point masses on outcomes with reward 1 and 0
    let tight = gap_bound_check(&[0.0, 1.0], &[1.0, 0.0], &[0.0, 1.0])?;
    println!("tight case: gap {} = tv {}", tight.delta_f64(), tight.tv_f64());
    Ok(())
}
