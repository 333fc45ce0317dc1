use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Code,
    Image,
}

impl Modality {
    pub fn tag(self) -> u8 {
        match self {
            Modality::Code => 0,
            Modality::Image => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Modality::Code),
            1 => Some(Modality::Image),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Code => "code",
            Modality::Image => "image",
        }
    }
}
