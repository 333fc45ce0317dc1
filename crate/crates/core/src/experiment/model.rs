//! Fusion layer + classifier head as one trainable model.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifier::{dropout_mask, softmax_cross_entropy, Head, HeadKind, Trainable};
use crate::data::Sample;
use crate::error::{Error, Result};
use crate::gcsa::baselines::{MobiusFuseCache, MobiusFuseParams, XattnCache, XattnParams};
use crate::gcsa::{GcsaCache, GcsaOptions, GcsaParams};
use crate::hyperbolic::Curvature;
use crate::linalg::mean_of;
use crate::params::ParamSet;
use crate::rng::{stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FusionMode {
    Code,
    Image,
    Concat,
    Xattn,
    Mobius,
    Gcsa,
}

impl FusionMode {
    pub const ALL: [FusionMode; 6] = [
        FusionMode::Code,
        FusionMode::Image,
        FusionMode::Concat,
        FusionMode::Xattn,
        FusionMode::Mobius,
        FusionMode::Gcsa,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::Code => "code",
            FusionMode::Image => "image",
            FusionMode::Concat => "concat",
            FusionMode::Xattn => "xattn",
            FusionMode::Mobius => "mobius",
            FusionMode::Gcsa => "gcsa",
        }
    }

    /// FCN after GCSA, the CNN everywhere else.
    pub fn default_head(self) -> HeadKind {
        match self {
            FusionMode::Gcsa => HeadKind::Fcn,
            _ => HeadKind::Cnn,
        }
    }
}

impl std::str::FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "code" | "unimodal-code" => Ok(FusionMode::Code),
            "image" | "unimodal-image" => Ok(FusionMode::Image),
            "concat" => Ok(FusionMode::Concat),
            "xattn" | "euclid-xattn" => Ok(FusionMode::Xattn),
            "mobius" => Ok(FusionMode::Mobius),
            "gcsa" => Ok(FusionMode::Gcsa),
            _ => Err(Error::InvalidInput(format!("unknown fusion mode {s:?}"))),
        }
    }
}

impl std::fmt::Display for FusionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Fusion {
    Code,
    Image,
    Concat,
    Xattn(XattnParams),
    Mobius(MobiusFuseParams),
    Gcsa(GcsaParams),
}

enum FusionCache {
    Fixed,
    Xattn(XattnCache),
    Mobius(MobiusFuseCache),
    Gcsa(Box<GcsaCache>),
}

/// Shape and hyperparameters needed to build a fresh model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec {
    pub mode: FusionMode,
    pub head: HeadKind,
    pub d_code: usize,
    pub d_img: usize,
    pub d_model: usize,
    pub hidden: usize,
    pub n_classes: usize,
    pub curvature: Curvature,
    pub gcsa: GcsaOptions,
}

impl ModelSpec {
    pub fn feature_len(&self) -> usize {
        match self.mode {
            FusionMode::Code => self.d_code,
            FusionMode::Image => self.d_img,
            FusionMode::Concat => self.d_code + self.d_img,
            FusionMode::Xattn => 2 * self.d_model,
            FusionMode::Mobius | FusionMode::Gcsa => self.d_model,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub fusion: Fusion,
    pub head: Head,
}

impl Model {
    /// Fusion weights come from the fusion-init stream and head weights from
    /// the head-init stream, so changing the fusion never changes the
    /// head's initial draw for a given feature width.
    pub fn init(spec: &ModelSpec, seed: u64) -> Result<Self> {
        let mut frng = stream(seed, Stream::FusionInit);
        let mut hrng = stream(seed, Stream::HeadInit);
        let fusion = match spec.mode {
            FusionMode::Code => Fusion::Code,
            FusionMode::Image => Fusion::Image,
            FusionMode::Concat => Fusion::Concat,
            FusionMode::Xattn => Fusion::Xattn(XattnParams::init(
                spec.d_code,
                spec.d_img,
                spec.d_model,
                &mut frng,
            )),
            FusionMode::Mobius => Fusion::Mobius(MobiusFuseParams::init(
                spec.d_code,
                spec.d_img,
                spec.d_model,
                spec.curvature,
                &mut frng,
            )),
            FusionMode::Gcsa => Fusion::Gcsa(GcsaParams::init(
                spec.d_code,
                spec.d_img,
                spec.d_model,
                spec.curvature,
                spec.gcsa,
                &mut frng,
            )),
        };
        let head = Head::init(
            spec.head,
            spec.feature_len(),
            spec.n_classes,
            spec.hidden,
            &mut hrng,
        )?;
        Ok(Model { fusion, head })
    }

    fn features(&self, s: &Sample) -> Result<(Vec<f64>, FusionCache)> {
        if s.code.is_empty() || s.img.is_empty() {
            return Err(Error::InvalidInput(format!(
                "sample {} has an empty view",
                s.id
            )));
        }
        Ok(match &self.fusion {
            Fusion::Code => (mean_of(&s.code), FusionCache::Fixed),
            Fusion::Image => (mean_of(&s.img), FusionCache::Fixed),
            Fusion::Concat => {
                let mut v = mean_of(&s.code);
                v.extend(mean_of(&s.img));
                (v, FusionCache::Fixed)
            }
            Fusion::Xattn(p) => {
                let c = XattnCache::forward(p, &s.code, &s.img)?;
                (c.output().to_vec(), FusionCache::Xattn(c))
            }
            Fusion::Mobius(p) => {
                let c = MobiusFuseCache::forward(p, &s.code, &s.img)?;
                (c.output().to_vec(), FusionCache::Mobius(c))
            }
            Fusion::Gcsa(p) => {
                let c = GcsaCache::forward(p, &s.code, &s.img)?;
                (c.output().to_vec(), FusionCache::Gcsa(Box::new(c)))
            }
        })
    }

    /// Logits with an explicit dropout mask (`None` for evaluation).
    pub fn logits(&self, s: &Sample, mask: Option<&[f64]>) -> Result<Vec<f64>> {
        let (f, _) = self.features(s)?;
        Ok(self.head.forward(&f, mask)?.0)
    }

    /// Loss and gradient for a given mask; the training loop draws the mask.
    pub fn loss_grad_with_mask(
        &self,
        s: &Sample,
        label: usize,
        mask: Option<&[f64]>,
    ) -> Result<(f64, Model)> {
        let (f, fcache) = self.features(s)?;
        let (logits, hcache) = self.head.forward(&f, mask)?;
        let (loss, gl) = softmax_cross_entropy(&logits, label)?;
        let (g_head, g_feat) = self.head.backward(&hcache, &gl);
        let g_fusion = match (&self.fusion, fcache) {
            (Fusion::Xattn(p), FusionCache::Xattn(c)) => Fusion::Xattn(c.backward(p, &g_feat)),
            (Fusion::Mobius(p), FusionCache::Mobius(c)) => Fusion::Mobius(c.backward(p, &g_feat)),
            (Fusion::Gcsa(p), FusionCache::Gcsa(c)) => Fusion::Gcsa(c.backward(p, &g_feat)?.params),
            (other, _) => other.clone(),
        };
        Ok((
            loss,
            Model {
                fusion: g_fusion,
                head: g_head,
            },
        ))
    }
}

impl ParamSet for Model {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut t: Vec<&[f64]> = match &self.fusion {
            Fusion::Xattn(p) => p.tensors(),
            Fusion::Mobius(p) => p.tensors(),
            Fusion::Gcsa(p) => p.tensors(),
            _ => Vec::new(),
        };
        t.extend(self.head.tensors());
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut t: Vec<&mut [f64]> = match &mut self.fusion {
            Fusion::Xattn(p) => p.tensors_mut(),
            Fusion::Mobius(p) => p.tensors_mut(),
            Fusion::Gcsa(p) => p.tensors_mut(),
            _ => Vec::new(),
        };
        t.extend(self.head.tensors_mut());
        t
    }
}

impl Trainable for Model {
    type Input = Sample;

    fn n_classes(&self) -> usize {
        self.head.n_classes()
    }

    fn loss_grad(
        &self,
        x: &Sample,
        label: usize,
        dropout: f64,
        dropout_seed: u64,
    ) -> Result<(f64, Self)> {
        let mut rng = ChaCha8Rng::seed_from_u64(dropout_seed);
        let mask = dropout_mask(self.head.dropout_width(), dropout, &mut rng);
        self.loss_grad_with_mask(x, label, Some(&mask))
    }

    fn predict_proba(&self, x: &Sample) -> Result<Vec<f64>> {
        Ok(crate::classifier::softmax(&self.logits(x, None)?))
    }
}
