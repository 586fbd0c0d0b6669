use ocon_core::container::{Container, ContainerError, Section};

/// Bitwise CRC-32C (Castagnoli, reflected polynomial 0x82F63B78).
fn crc32c_bitwise(bytes: &[u8]) -> u32 {
    let mut crc = !0u32;
    for &b in bytes {
        crc ^= b as u32;
        for _ in 0..8 {
            crc = if crc & 1 != 0 { (crc >> 1) ^ 0x82F6_3B78 } else { crc >> 1 };
        }
    }
    !crc
}

fn fixture() -> Vec<u8> {
    let header = br#"{"metadata":{"kind":"fixture"},"sections":[{"name":"w","shape":[2,2]},{"name":"b","shape":[1]}]}"#;
    let mut out = Vec::new();
    out.extend_from_slice(b"OCFS1\0\r\n");
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(header);
    for v in [1.0f64, -2.5, 0.1, f64::MIN_POSITIVE, 3.0] {
        out.extend_from_slice(&v.to_bits().to_le_bytes());
    }
    let crc = crc32c_bitwise(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

#[test]
fn crc_oracle_check_value() {
    assert_eq!(crc32c_bitwise(b"123456789"), 0xE306_9283);
}

#[test]
fn hand_built_bytes_parse() {
    let c = Container::from_bytes(&fixture()).unwrap();
    assert_eq!(c.metadata["kind"], "fixture");
    let w = c.section("w").unwrap();
    assert_eq!(w.shape, vec![2, 2]);
    assert_eq!(w.data, vec![1.0, -2.5, 0.1, f64::MIN_POSITIVE]);
    assert_eq!(c.section("b").unwrap().data, vec![3.0]);
    assert_eq!(c.to_bytes().unwrap(), fixture());
}

#[test]
fn every_single_byte_flip_is_detected() {
    let good = fixture();
    for i in 0..good.len() {
        let mut bad = good.clone();
        bad[i] ^= 0x10;
        assert!(Container::from_bytes(&bad).is_err(), "flip at byte {i} went unnoticed");
    }
}

#[test]
fn specific_failures() {
    let good = fixture();
    let mut bad = good.clone();
    bad[0] = b'X';
    assert_eq!(Container::from_bytes(&bad).unwrap_err(), ContainerError::BadMagic);
    let mut bad = good.clone();
    bad[8] = 2;
    assert_eq!(Container::from_bytes(&bad).unwrap_err(), ContainerError::VersionMismatch(2));
    assert_eq!(Container::from_bytes(&good[..good.len() - 9]).unwrap_err(), ContainerError::TruncatedFile);
    let mut bad = good.clone();
    let n = bad.len();
    bad[n - 12] ^= 1;
    assert!(matches!(Container::from_bytes(&bad), Err(ContainerError::ChecksumMismatch { .. })));
}

#[test]
fn file_round_trip_is_bit_exact() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.ocfs");
    let data: Vec<f64> = (0..64).map(|i| (i as f64).sin() * 1e-300).chain([f64::NAN, -0.0, f64::INFINITY]).collect();
    let mut c = Container::new(serde_json::json!({"n": 67}));
    c.push(Section::vector("x", data.clone()));
    c.save(&path).unwrap();
    let back = Container::load(&path).unwrap();
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&back.section("x").unwrap().data), bits(&data));
}
