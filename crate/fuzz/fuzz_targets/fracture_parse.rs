#![no_main]

use libfuzzer_sys::fuzz_target;
use nlmc_core::geometry::{mesh_fractures, FineGrid, FractureGeometry, Rect};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(geom) = FractureGeometry::parse(text) else { return };
    let again = FractureGeometry::parse(&geom.to_text()).expect("printed geometry parses");
    assert_eq!(again.segments().len(), geom.segments().len());
    let grid = FineGrid::new(16, 16, Rect::unit()).unwrap();
    if let Ok(mesh) = mesh_fractures(&grid, &geom) {
        let total: f64 = mesh.cells().iter().map(|c| c.length).sum();
        assert!(total.is_finite());
        assert!(mesh.cells().iter().all(|c| c.host < grid.num_cells()));
    }
});
