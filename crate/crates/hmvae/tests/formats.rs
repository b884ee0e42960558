use hmvae::formats::{decode_checkpoint, decode_vmat, encode_checkpoint, encode_vmat, vmat_load, vmat_save};
use hmvae::Error;
use hmvae_core::data::{standardize, SubjectMatrix, VolumeMask};
use hmvae_core::optim::{train, TrainConfig};
use hmvae_core::Matrix;

fn sample_matrix() -> SubjectMatrix {
    let values = Matrix::from_fn(3, 5, |i, j| (i * 5 + j) as f64 * 0.25 - 1.0);
    let mask = VolumeMask::full_grid(&[5, 1]).unwrap();
    SubjectMatrix::new(
        values,
        vec!["a".into(), "b".into(), "c".into()],
        Some(vec![0, 1, 1]),
        Some(mask),
    )
    .unwrap()
}

/// Rewrites the JSON header, keeping the payload.
fn with_header(bytes: &[u8], edit: impl FnOnce(&mut serde_json::Value)) -> Vec<u8> {
    let len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let mut header: serde_json::Value = serde_json::from_slice(&bytes[16..16 + len]).unwrap();
    edit(&mut header);
    let text = serde_json::to_vec(&header).unwrap();
    let mut out = bytes[..8].to_vec();
    out.extend_from_slice(&(text.len() as u64).to_le_bytes());
    out.extend_from_slice(&text);
    out.extend_from_slice(&bytes[16 + len..]);
    out
}

#[test]
fn vmat_round_trip_through_disk() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.vmat");
    let m = sample_matrix();
    vmat_save(&m, &path).unwrap();
    // values are exact multiples of 1/4, so 32-bit storage is lossless
    assert_eq!(vmat_load(&path).unwrap(), m);
}

#[test]
fn vmat_stores_32_bit_values() {
    let mut m = sample_matrix();
    m.values.set(0, 0, 0.1);
    let back = decode_vmat(&encode_vmat(&m).unwrap()).unwrap();
    assert_eq!(back.values.get(0, 0), f64::from(0.1f32));
}

#[test]
fn vmat_payload_shorter_than_header_is_truncated() {
    let bytes = encode_vmat(&sample_matrix()).unwrap();
    let short = &bytes[..bytes.len() - 5 * 4];
    match decode_vmat(short) {
        Err(Error::Truncated { expected, found, .. }) => assert_eq!(expected - found, 20),
        other => panic!("expected truncation, got {other:?}"),
    }
}

#[test]
fn vmat_trailing_bytes_are_rejected() {
    let mut bytes = encode_vmat(&sample_matrix()).unwrap();
    bytes.extend_from_slice(&[0, 0, 0, 0]);
    assert!(matches!(decode_vmat(&bytes), Err(Error::TrailingBytes { extra: 4, .. })));
}

#[test]
fn vmat_label_count_must_match_rows() {
    let bytes = encode_vmat(&sample_matrix()).unwrap();
    let bad = with_header(&bytes, |h| h["labels"] = serde_json::json!([0, 1]));
    assert!(matches!(decode_vmat(&bad), Err(Error::Core(_))));
}

#[test]
fn vmat_unknown_header_field_is_rejected() {
    let bytes = encode_vmat(&sample_matrix()).unwrap();
    let bad = with_header(&bytes, |h| h["extra"] = serde_json::json!(1));
    assert!(matches!(decode_vmat(&bad), Err(Error::Header { .. })));
}

#[test]
fn vmat_magic_and_version_are_checked() {
    let bytes = encode_vmat(&sample_matrix()).unwrap();
    let mut wrong = bytes.clone();
    wrong[0] = b'X';
    assert!(matches!(decode_vmat(&wrong), Err(Error::BadMagic { .. })));
    let mut newer = bytes.clone();
    newer[7] = b'9';
    assert!(matches!(decode_vmat(&newer), Err(Error::Version { .. })));
    assert!(matches!(decode_vmat(&bytes[..6]), Err(Error::Truncated { .. })));
}

fn tiny_checkpoint() -> hmvae_core::optim::Checkpoint {
    let x = Matrix::from_fn(6, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
    let (x, stats) = standardize(&SubjectMatrix::from_values(x)).unwrap();
    let cfg = TrainConfig {
        epochs: 3,
        latent_dim: 2,
        recognition_hidden: 3,
        generation_hidden: 3,
        batch_size: 4,
        ..TrainConfig::default()
    };
    train(&x.values, &cfg, stats, &mut |_| {}).unwrap()
}

#[test]
fn checkpoint_round_trip_is_exact() {
    let cp = tiny_checkpoint();
    let bytes = encode_checkpoint(&cp).unwrap();
    assert_eq!(decode_checkpoint(&bytes).unwrap(), cp);
    assert_eq!(encode_checkpoint(&decode_checkpoint(&bytes).unwrap()).unwrap(), bytes);
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let bytes = encode_checkpoint(&tiny_checkpoint()).unwrap();
    assert!(matches!(decode_checkpoint(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
    let vmat = encode_vmat(&sample_matrix()).unwrap();
    assert!(matches!(decode_checkpoint(&vmat), Err(Error::BadMagic { .. })));
    let bad = with_header(&bytes, |h| h["blocks"][0][1] = serde_json::json!(99));
    assert!(decode_checkpoint(&bad).is_err());
}
