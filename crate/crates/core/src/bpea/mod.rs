//! Source programs to binary pre-executable artifacts to RGB images.
//!
//! A program is compiled without linking ([`compile`]); when compilation is
//! impossible its text is normalized instead ([`normalize`]). The resulting
//! byte stream is laid out as RGB pixels on a 256-wide grid ([`image`]) and
//! written as PNG, with a JSON-lines manifest recording how each image was
//! produced ([`manifest`]).

pub mod compile;
pub mod image;
pub mod manifest;
pub mod normalize;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use compile::{compile_source, CompileOutcome, ToolchainConfig};
pub use image::{
    bytes_to_image, decode_png, encode_png, image_to_bytes, layout_bytes, write_png, RgbImage,
    IMAGE_WIDTH,
};
pub use manifest::{
    convert_file, convert_tree, read_manifest, write_manifest, ConvertOptions, ManifestEntry,
};
pub use normalize::{normalize_fallback, PLACEHOLDER};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceLanguage {
    C,
    Cpp,
    Java,
    Python,
}

impl SourceLanguage {
    pub fn extensions(self) -> &'static [&'static str] {
        match self {
            SourceLanguage::C => &["c"],
            SourceLanguage::Cpp => &["cpp", "cc", "cxx", "c++"],
            SourceLanguage::Java => &["java"],
            SourceLanguage::Python => &["py"],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SourceLanguage::C => "c",
            SourceLanguage::Cpp => "cpp",
            SourceLanguage::Java => "java",
            SourceLanguage::Python => "python",
        }
    }
}

impl fmt::Display for SourceLanguage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SourceLanguage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "c" => Ok(SourceLanguage::C),
            "cpp" | "c++" | "cxx" => Ok(SourceLanguage::Cpp),
            "java" => Ok(SourceLanguage::Java),
            "python" | "py" => Ok(SourceLanguage::Python),
            other => Err(Error::InvalidInput(format!("unknown language {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArtifactOrigin {
    Compiled,
    FallbackNormalized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BpeaArtifact {
    bytes: Vec<u8>,
    origin: ArtifactOrigin,
    language: SourceLanguage,
    toolchain_record: String,
}

impl BpeaArtifact {
    pub fn new(
        bytes: Vec<u8>,
        origin: ArtifactOrigin,
        language: SourceLanguage,
        toolchain_record: String,
    ) -> Result<Self> {
        if bytes.is_empty() {
            return Err(Error::EmptyArtifact("artifact has no bytes".into()));
        }
        if origin == ArtifactOrigin::Compiled && toolchain_record.trim().is_empty() {
            return Err(Error::InvalidInput(
                "compiled artifact needs a toolchain record".into(),
            ));
        }
        Ok(BpeaArtifact {
            bytes,
            origin,
            language,
            toolchain_record,
        })
    }

    pub fn bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn origin(&self) -> ArtifactOrigin {
        self.origin
    }

    pub fn language(&self) -> SourceLanguage {
        self.language
    }

    pub fn toolchain_record(&self) -> &str {
        &self.toolchain_record
    }
}
