//! The aggregated per-site sampler against a per-particle reference stepper.

use brw::presets;
use brw::simulator::aggregation_chi_square;

fn main() {
    let test = aggregation_chi_square(&presets::two_near(), 20_000, 10, 3);
    for c in &test.categories {
        println!("{:<24} {:>6} {:>6}", c.category, c.aggregated, c.naive);
    }
    println!("χ² = {:.3} on {} degrees of freedom, p = {:.4}", test.statistic, test.dof, test.p_value);
}
