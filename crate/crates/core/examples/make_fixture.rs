//! Regenerates the bundled synthetic dataset under `fixtures/synthetic`.
//!
//! cargo run -p coinfactor --example make_fixture -- [dir]

use coinfactor::synthetic::{bundled_spec, write_fixture, BUNDLED_SEED};

fn main() {
    let dir = std::env::args().nth(1).unwrap_or_else(|| "fixtures/synthetic".into());
    let series = write_fixture(&bundled_spec(), BUNDLED_SEED, &dir).expect("fixture written");
    for s in &series {
        println!("{}\t{} rows\t{} gaps", s.ticker(), s.len(), s.gap_count());
    }
}
