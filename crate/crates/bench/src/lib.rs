//! Shared fixtures for the benchmarks.

use ftwist_core::verify::battery;
use ftwist_core::{catalog_entry, TangentSample, TwistedProduct};

/// The product for a catalog id and its first battery sample.
pub fn fixture(id: &str) -> (TwistedProduct, TangentSample) {
    let spec = catalog_entry(id).expect("catalog entry exists");
    let t = spec.instantiate().expect("catalog entries instantiate");
    let s = battery(&spec, &t, 1, 42).expect("battery draws").remove(0);
    (t, s)
}

#[cfg(test)]
mod tests {
    #[test]
    fn fixtures_build() {
        let (t, s) = super::fixture("randers-randers");
        assert_eq!(s.x.len(), 4);
        assert!(t.point(&s.x, &s.y, &Default::default()).is_ok());
    }
}
