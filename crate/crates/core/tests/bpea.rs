use std::path::Path;
use std::process::Command;

use gocoma::bpea::image::{decode_png, image_to_bytes, IMAGE_WIDTH};
use gocoma::bpea::{
    compile_source, convert_file, convert_tree, layout_bytes, normalize_fallback, read_manifest,
    write_manifest, ArtifactOrigin, CompileOutcome, ConvertOptions, SourceLanguage,
    ToolchainConfig,
};
use proptest::prelude::*;

fn norm(src: &str, lang: SourceLanguage) -> String {
    String::from_utf8(
        normalize_fallback(src.as_bytes(), lang)
            .unwrap()
            .bytes()
            .to_vec(),
    )
    .unwrap()
}

#[test]
fn normalization_goldens() {
    use SourceLanguage::*;
    assert_eq!(norm("int a = 1; // note", C), "int a = 1;");
    assert_eq!(
        norm("int a = 1;   /* x\n y */  int b;", Cpp),
        "int a = 1; int b;"
    );
    assert_eq!(
        norm("puts(\"hi // there\");\nchar c = 'x';", C),
        "puts(S); char c = S;"
    );
    assert_eq!(norm("String s = \"a\\\"b\"; // c", Java), "String s = S;");
    assert_eq!(
        norm("x = 'a#b'  # tail\nprint(x)", Python),
        "x = S print(x)"
    );
    assert_eq!(
        norm(
            "def f():\n    \"\"\"doc\n string\"\"\"\n    return 1",
            Python
        ),
        "def f(): S return 1"
    );
}

#[test]
fn empty_after_normalization_is_an_error() {
    assert!(normalize_fallback(b"// only a comment\n", SourceLanguage::C).is_err());
    assert!(normalize_fallback(b"  \n\t ", SourceLanguage::Python).is_err());
}

fn lang_strategy() -> impl Strategy<Value = SourceLanguage> {
    prop::sample::select(vec![
        SourceLanguage::C,
        SourceLanguage::Cpp,
        SourceLanguage::Java,
        SourceLanguage::Python,
    ])
}

proptest! {
    #[test]
    fn normalization_is_idempotent(
        src in "[a-z0-9 \\n\\t;(){}=+#/*'\"\\\\]{0,120}",
        lang in lang_strategy(),
    ) {
        if let Ok(first) = normalize_fallback(src.as_bytes(), lang) {
            let again = normalize_fallback(first.bytes(), lang).unwrap();
            prop_assert_eq!(again.bytes(), first.bytes());
            prop_assert!(!first.bytes().windows(2).any(|w| w == b"  "));
        }
    }

    #[test]
    fn layout_round_trips(bytes in prop::collection::vec(any::<u8>(), 1..3000)) {
        let img = layout_bytes(&bytes).unwrap();
        prop_assert_eq!(img.height(), bytes.len().div_ceil(3).div_ceil(IMAGE_WIDTH));
        prop_assert_eq!(image_to_bytes(&img, bytes.len()).unwrap(), bytes);
    }
}

#[test]
fn nine_bytes_make_one_row() {
    let img = layout_bytes(&[1, 2, 3, 4, 5, 6, 7, 8, 9]).unwrap();
    assert_eq!((img.width(), img.height()), (256, 1));
    assert_eq!(img.pixel(0, 0), [1, 2, 3]);
    assert_eq!(img.pixel(0, 2), [7, 8, 9]);
    assert_eq!(img.pixel(0, 3), [0, 0, 0]);
    assert_eq!(img.pixel(0, 255), [0, 0, 0]);
    assert_eq!(
        image_to_bytes(&img, 9).unwrap(),
        (1..=9).collect::<Vec<u8>>()
    );
}

#[test]
fn padding_must_be_zero_on_the_way_back() {
    let img = layout_bytes(&[5; 7]).unwrap();
    assert!(image_to_bytes(&img, 6).is_err());
    assert!(image_to_bytes(&img, 0).is_err());
    assert!(image_to_bytes(&img, 769).is_err());
}

fn write(dir: &Path, rel: &str, text: &str) {
    let p = dir.join(rel);
    std::fs::create_dir_all(p.parent().unwrap()).unwrap();
    std::fs::write(p, text).unwrap();
}

#[test]
fn manifest_round_trips_and_ids_follow_paths() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("src");
    write(&src, "alice/a.py", "print('a')\n");
    write(&src, "bob/nested/b.py", "x = 1  # c\n");
    write(&src, "notes.txt", "ignored");
    let mut opts = ConvertOptions::new(SourceLanguage::Python);
    opts.fallback_only = true;
    let entries = convert_tree(&src, &dir.path().join("img"), &opts, 2).unwrap();
    let ids: Vec<&str> = entries.iter().map(|e| e.id.as_str()).collect();
    assert_eq!(ids, ["alice__a", "bob__nested__b"]);
    assert!(entries
        .iter()
        .all(|e| e.origin == ArtifactOrigin::FallbackNormalized && e.toolchain_record.is_empty()));
    assert_eq!(entries[1].byte_len, "x = 1".len());

    let m = dir.path().join("manifest.jsonl");
    write_manifest(&entries, &m).unwrap();
    assert_eq!(std::fs::read_to_string(&m).unwrap().lines().count(), 2);
    assert_eq!(read_manifest(&m).unwrap(), entries);

    let png = std::fs::read(&entries[0].image_path).unwrap();
    let back = image_to_bytes(&decode_png(&png).unwrap(), entries[0].byte_len).unwrap();
    assert_eq!(back, b"print(S)");
}

#[test]
fn compiled_python_differs_from_fallback() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "ok.py", "def f(x):\n    return x + 1\n");
    let p = dir.path().join("ok.py");
    let e = convert_file(
        &p,
        "ok",
        dir.path(),
        &ConvertOptions::new(SourceLanguage::Python),
    )
    .unwrap();
    assert_eq!(e.origin, ArtifactOrigin::Compiled);
    assert!(!e.toolchain_record.is_empty());
    write(dir.path(), "bad.py", "def f(:\n");
    let bad = dir.path().join("bad.py");
    let e = convert_file(
        &bad,
        "bad",
        dir.path(),
        &ConvertOptions::new(SourceLanguage::Python),
    )
    .unwrap();
    assert_eq!(e.origin, ArtifactOrigin::FallbackNormalized);
}

#[test]
fn missing_source_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let r = compile_source(
        &dir.path().join("nope.c"),
        SourceLanguage::C,
        &ToolchainConfig::default(),
    );
    assert!(r.is_err());
}

#[test]
fn java_compiles_when_javac_is_present() {
    if Command::new("javac").arg("-version").output().is_err() {
        eprintln!("javac not found, skipping");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    write(
        dir.path(),
        "Main.java",
        "public class Main { public static void main(String[] a) {} }\n",
    );
    let out = compile_source(
        &dir.path().join("Main.java"),
        SourceLanguage::Java,
        &ToolchainConfig::default(),
    )
    .unwrap();
    let CompileOutcome::Compiled(a) = out else {
        panic!("expected compiled output")
    };
    assert_eq!(&a.bytes()[..2], b"PK");
}
