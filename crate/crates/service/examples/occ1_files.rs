//! Writes a small grid to OCC1, dumps the header, reads it back and shows
//! how malformed files are rejected.
//!
//! cargo run -p occ-service --example occ1_files

use occ_core::grid::{DenseLabelGrid, GridSpec};
use occ_core::labels::Label;
use occ_service::occ1;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let spec = GridSpec::new([-2.0, -2.0, -1.0], 0.25, [8, 16, 16])?;
    let mut grid = DenseLabelGrid::empty(spec);
    for x in 4..12 {
        grid.set([0, 8, x], Label::DRIVE_SURFACE);
    }
    grid.set([2, 3, 3], Label::CAR);
    grid.set([7, 15, 15], Label::VEGETATION);
    let sparse = grid.to_sparse();

    let bytes = occ1::write(&sparse)?;
    println!("{} records -> {} bytes", sparse.records().len(), bytes.len());
    println!("header: {:02x?}", &bytes[..36]);
    println!("first record: {:02x?}", &bytes[36..43]);

    let back = occ1::read(&bytes)?;
    assert_eq!(back, sparse);
    assert_eq!(occ1::write(&back)?, bytes);
    println!("round trip ok, re-encoding is byte-identical");

    let path = std::env::temp_dir().join("occ1_example.occ1");
    occ1::write_file(&path, &sparse)?;
    println!("{} occupied voxels in {}", occ1::read_file(&path)?.records().len(), path.display());
    std::fs::remove_file(&path)?;

    let mut bad_magic = bytes.clone();
    bad_magic[0] = b'X';
    let mut unsorted = bytes.clone();
    for i in 0..7 {
        unsorted.swap(36 + i, 43 + i);
    }
    let mut bad_label = bytes.clone();
    bad_label[42] = 200;
    let cases: [(&str, Vec<u8>); 5] = [
        ("bad magic", bad_magic),
        ("cut short", bytes[..bytes.len() - 3].to_vec()),
        ("extra byte", [bytes.as_slice(), &[0]].concat()),
        ("swapped records", unsorted),
        ("label 200", bad_label),
    ];
    for (what, b) in cases {
        match occ1::read(&b) {
            Ok(_) => println!("{what:<16} accepted"),
            Err(e) => println!("{what:<16} {:<14} {e}", e.code()),
        }
    }
    Ok(())
}
