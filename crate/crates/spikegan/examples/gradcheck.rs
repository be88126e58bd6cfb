//! Verify every analytic gradient against central finite differences:
//! dense stacks, convolutional stacks, and the spiking-episode
//! log-likelihood accumulation.

fn main() {
    let results = spikegan::experiment::gradcheck(0);
    let mut ok = true;
    for r in &results {
        println!(
            "{:<10} max relative error {:.3e}  {}",
            r.name,
            r.max_rel_err,
            if r.ok { "ok" } else { "FAIL" }
        );
        ok &= r.ok;
    }
    assert!(ok, "gradient check failed");
}
