#![no_main]
use libfuzzer_sys::fuzz_target;
use pcd_lab::io::{decode_field, encode_field};

fuzz_target!(|data: &[u8]| {
    if let Ok((u, used)) = decode_field(data) {
        assert!(used <= data.len());
        let (v, n) = decode_field(&encode_field(&u)).expect("re-encoded dump decodes");
        assert_eq!(n, used);
        assert_eq!(u, v);
    }
});
