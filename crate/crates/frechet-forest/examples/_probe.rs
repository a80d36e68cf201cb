use frechet_forest::harness::validate::*;

fn main() {
    let sigma = [1.0, -0.6, -0.6, 0.5];
    let mut within = 0;
    for seed in 0..12u64 {
        let c = wishart_mean_validation(15.0, &sigma, 2, 25_000, 600, seed).unwrap();
        let ok = c.ai_within_one_step();
        within += u32::from(ok);
        println!(
            "seed {seed}: AI argmin t={:+.4} ({}), LC argmin t={:.4} ({})",
            c.t_grid[c.ai_argmin_index],
            if ok { "ok" } else { "off" },
            c.t_grid[c.lc_argmin_index],
            if c.lc_within_one_step() { "ok" } else { "off" },
        );
    }
    println!("AI within one step: {within}/12");
}
