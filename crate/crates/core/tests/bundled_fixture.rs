use std::path::PathBuf;

use coinfactor::synthetic::{bundled_spec, write_fixture, BUNDLED_SEED};

#[test]
fn bundled_csvs_match_the_generator() {
    let bundled = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/synthetic");
    let dir = tempfile::tempdir().unwrap();
    let series = write_fixture(&bundled_spec(), BUNDLED_SEED, dir.path()).unwrap();
    assert_eq!(series.len(), 5);
    for s in &series {
        let name = format!("{}.csv", s.ticker());
        let fresh = std::fs::read(dir.path().join(&name)).unwrap();
        let shipped = std::fs::read(bundled.join(&name)).unwrap();
        assert!(fresh == shipped, "{name} differs from the generator output; rerun the make_fixture example");
    }
}
