"""Supported backbones and the extraction settings."""

from dataclasses import asdict, dataclass, field


@dataclass(frozen=True)
class ModelInfo:
    hub_id: str
    dim: int
    # how one vector (or one vector per token) is read off the backbone
    pooling: str
    input_size: int = 0  # vision only, square side in pixels


# CodeT5+ 220m has 768-wide states; the mean of the last three encoder
# layers concatenated gives 2304.
CODE_MODELS = {
    "codet5p": ModelInfo("Salesforce/codet5p-220m", 2304, "mean of last 3 encoder layers, concatenated"),
    "qwen2.5-coder": ModelInfo("Qwen/Qwen2.5-Coder-3B", 2048, "mean of last hidden layer"),
    "unixcoder": ModelInfo("microsoft/unixcoder-base", 768, "mean of last hidden layer"),
    "codebert": ModelInfo("microsoft/codebert-base", 768, "first token of last hidden layer"),
}

VISION_MODELS = {
    "convnext-base": ModelInfo("facebook/convnext-base-224", 1024, "pooler output", 224),
    "efficientnetv2-m": ModelInfo("torchvision:efficientnet_v2_m", 1280, "global average pool", 480),
    "vit-base-patch16-224": ModelInfo("google/vit-base-patch16-224", 768, "CLS token of last hidden layer", 224),
    "maxvit-t": ModelInfo("torchvision:maxvit_t", 512, "global average pool", 224),
}

POOLINGS = ("pooled", "tokens")


@dataclass
class ExtractorConfig:
    code_model: str = "codebert"
    vision_model: str = "vit-base-patch16-224"
    # "pooled" gives T=1; "tokens" keeps one vector per token or patch
    pooling: str = "pooled"
    resize: str = "bilinear"
    batch_size: int = 8
    device: str = "cpu"
    revision: str = "main"
    extra: dict = field(default_factory=dict)

    def validate(self):
        if self.code_model not in CODE_MODELS:
            raise ValueError(f"unknown code model {self.code_model!r}; choose from {sorted(CODE_MODELS)}")
        if self.vision_model not in VISION_MODELS:
            raise ValueError(f"unknown vision model {self.vision_model!r}; choose from {sorted(VISION_MODELS)}")
        if self.pooling not in POOLINGS:
            raise ValueError(f"pooling must be one of {POOLINGS}")
        if self.resize not in ("bilinear", "bicubic", "nearest"):
            raise ValueError(f"unknown resize filter {self.resize!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        return self

    def to_dict(self):
        return asdict(self)
