use qroute::checkpoint::{decode, encode, load, save, CheckpointError};
use qroute_core::gnn::{GnnConfig, MessageDirection, ParameterSet};
use qroute_core::rng::{self, Stream};

fn params(direction: MessageDirection) -> ParameterSet {
    let cfg = GnnConfig { embedding_dim: 6, hidden_dim: 9, direction };
    ParameterSet::init(cfg, &mut rng::stream(3, Stream::Init))
}

#[test]
fn round_trip_is_bit_exact() {
    for d in [MessageDirection::Backward, MessageDirection::Forward] {
        let p = params(d);
        let back = decode(&encode(&p), Some(p.config())).unwrap();
        assert_eq!(back.config(), p.config());
        assert_eq!(back.as_slice().len(), p.as_slice().len());
        assert!(back.as_slice().iter().zip(p.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }
}

#[test]
fn save_and_load_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    let p = params(MessageDirection::Backward);
    save(&path, &p).unwrap();
    assert_eq!(load(&path, None).unwrap().as_slice(), p.as_slice());
    assert!(matches!(load(&dir.path().join("missing"), None), Err(CheckpointError::Io(_))));
}

#[test]
fn corrupt_files_are_rejected() {
    let bytes = encode(&params(MessageDirection::Backward));
    let mut bad = bytes.clone();
    bad[0] = b'X';
    assert!(matches!(decode(&bad, None), Err(CheckpointError::BadMagic)));
    let mut bad = bytes.clone();
    bad[8] = 9;
    assert!(matches!(decode(&bad, None), Err(CheckpointError::UnsupportedVersion(_))));
    let mut bad = bytes.clone();
    bad[20] = 7;
    assert!(matches!(decode(&bad, None), Err(CheckpointError::BadDirection(7))));
    for cut in [10, 20, bytes.len() / 2, bytes.len() - 1] {
        assert!(matches!(decode(&bytes[..cut], None), Err(CheckpointError::Truncated(_))), "cut {cut}");
    }
    let mut long = bytes.clone();
    long.extend_from_slice(&[0; 5]);
    assert!(matches!(decode(&long, None), Err(CheckpointError::TrailingBytes(5))));
}

#[test]
fn dimension_mismatch_is_reported() {
    let bytes = encode(&params(MessageDirection::Backward));
    let want = GnnConfig { embedding_dim: 8, hidden_dim: 9, direction: MessageDirection::Backward };
    assert!(matches!(decode(&bytes, Some(&want)), Err(CheckpointError::DimensionMismatch { expected: 8, found: 6 })));
    let want = GnnConfig { embedding_dim: 6, hidden_dim: 4, direction: MessageDirection::Backward };
    assert!(matches!(decode(&bytes, Some(&want)), Err(CheckpointError::HiddenMismatch { expected: 4, found: 9 })));
}
