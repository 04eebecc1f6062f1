#![no_main]

use libfuzzer_sys::fuzz_target;
use nlmc_core::fine_system::parse_raster;

// First two bytes pick the grid shape, the rest is the raster text.
fuzz_target!(|data: &[u8]| {
    let [a, b, rest @ ..] = data else { return };
    let (nx, ny) = (*a as usize % 9 + 1, *b as usize % 9 + 1);
    let Ok(text) = std::str::from_utf8(rest) else { return };
    if let Ok(values) = parse_raster(text, nx, ny) {
        assert_eq!(values.len(), nx * ny);
        assert!(values.iter().all(|v| v.is_finite() && *v > 0.0));
    }
});
