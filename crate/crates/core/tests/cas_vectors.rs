//! Content ids frozen from an independent SHA-256 (Python hashlib).

use tabforge::canonical::Digest;
use tabforge::gateway::{parse_cid, ContentStore, DirCas, MemoryCas};

const VECTORS: [(&[u8], &str); 3] = [
    (b"", "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"),
    (b"{}", "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"),
    (b"abc", "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"),
];

const CORPUS_DOCS: [(&str, &str); 2] = [
    ("salesagr.json", "eff411984cdbc4e092ca4c98ad1b8e92d1bcbd128d78a4a9d9dec8ed4dc8f961"),
    ("insurance.json", "4d1b080b4dfe06017642fe52fe3d773bdc11b58337c5299123da588bcb86af36"),
];

fn check(cas: &dyn ContentStore) {
    for (bytes, hex) in VECTORS {
        let cid = cas.put(bytes).unwrap();
        assert_eq!(cid.to_string(), format!("sha256:{hex}"));
        assert_eq!(parse_cid(&cid.to_string()).unwrap(), cid);
        assert_eq!(cas.get(&cid).unwrap(), bytes);
    }
    for (name, hex) in CORPUS_DOCS {
        let bytes = std::fs::read(format!("{}/corpus/docs/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap();
        assert_eq!(cas.put(&bytes).unwrap().hex(), hex, "{name}");
    }
}

#[test]
fn memory_store_matches_vectors() {
    check(&MemoryCas::new());
}

#[test]
fn directory_store_matches_vectors_and_names_files_by_hex() {
    let dir = tempfile::tempdir().unwrap();
    let cas = DirCas::open(dir.path()).unwrap();
    check(&cas);
    let cid = Digest::of(b"{}");
    assert_eq!(cas.path_of(&cid), dir.path().join(VECTORS[1].1));
    assert!(cas.path_of(&cid).is_file());
    let reopened = DirCas::open(dir.path()).unwrap();
    assert_eq!(reopened.get(&cid).unwrap(), b"{}");
}

#[test]
fn malformed_cids_are_rejected() {
    for bad in ["", "sha256:", "sha256:xyz", "md5:44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a", "44136fa355b3678a1146ad16f7e8649e94fb4fc21fe77e8310c060f61caaff8a"] {
        assert_eq!(parse_cid(bad).unwrap_err().code(), "MalformedCid", "{bad:?}");
    }
}
