#![no_main]
use libfuzzer_sys::fuzz_target;
use pcd_lab::io::{decode_trajectory, parse_sidecar};

// First byte picks the split between the binary part and the JSON sidecar.
fuzz_target!(|data: &[u8]| {
    let Some((&cut, rest)) = data.split_first() else { return };
    let cut = (cut as usize * rest.len()) / 255;
    let (bin, text) = rest.split_at(cut);
    let Ok(text) = std::str::from_utf8(text) else { return };
    let _ = parse_sidecar(text);
    let _ = decode_trajectory(bin, text);
});
