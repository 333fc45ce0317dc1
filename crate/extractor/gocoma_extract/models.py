"""Pretrained backbones, loaded lazily so the rest of the package works
without torch."""

import numpy as np

from .config import CODE_MODELS, VISION_MODELS


class CodeEncoder:
    def __init__(self, name, cfg):
        import torch
        from transformers import AutoModel, AutoTokenizer

        self.torch = torch
        self.info = CODE_MODELS[name]
        self.name = name
        self.pooling = cfg.pooling
        self.device = cfg.device
        self.tok = AutoTokenizer.from_pretrained(self.info.hub_id, revision=cfg.revision)
        model = AutoModel.from_pretrained(self.info.hub_id, revision=cfg.revision)
        self.model = (model.encoder if name == "codet5p" else model).to(cfg.device).eval()

    def encode(self, texts):
        torch = self.torch
        batch = self.tok(texts, padding=True, truncation=True, return_tensors="pt").to(self.device)
        with torch.no_grad():
            out = self.model(**batch, output_hidden_states=True)
        mask = batch["attention_mask"]
        if self.name == "codet5p":
            states = torch.cat(out.hidden_states[-3:], dim=-1)
        else:
            states = out.hidden_states[-1]
        result = []
        for i in range(len(texts)):
            n = int(mask[i].sum())
            h = states[i, :n]
            if self.pooling == "tokens":
                result.append(h.cpu().numpy())
            elif self.name == "codebert":
                result.append(h[:1].cpu().numpy())
            else:
                result.append(h.mean(dim=0, keepdim=True).cpu().numpy())
        return result


class VisionEncoder:
    _MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
    _STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

    def __init__(self, name, cfg):
        import torch

        self.torch = torch
        self.info = VISION_MODELS[name]
        self.name = name
        self.pooling = cfg.pooling
        self.device = cfg.device
        if self.info.hub_id.startswith("torchvision:"):
            import torchvision

            ctor = getattr(torchvision.models, self.info.hub_id.split(":", 1)[1])
            net = ctor(weights="DEFAULT")
            net.classifier = torch.nn.Identity() if name == "efficientnetv2-m" else net.classifier[:-1]
            self.hf = False
        else:
            from transformers import AutoModel

            net = AutoModel.from_pretrained(self.info.hub_id, revision=cfg.revision)
            self.hf = True
        self.model = net.to(cfg.device).eval()

    def _tensor(self, images):
        arr = np.stack([(np.asarray(im, dtype=np.float32) / 255.0 - self._MEAN) / self._STD for im in images])
        return self.torch.from_numpy(arr.transpose(0, 3, 1, 2)).to(self.device)

    def encode(self, images):
        torch = self.torch
        x = self._tensor(images)
        with torch.no_grad():
            if not self.hf:
                return [v[None, :] for v in self.model(x).cpu().numpy()]
            out = self.model(pixel_values=x)
        if self.pooling == "tokens" and self.name.startswith("vit"):
            return list(out.last_hidden_state.cpu().numpy())
        if self.name.startswith("vit"):
            return [v[None, :] for v in out.last_hidden_state[:, 0].cpu().numpy()]
        pooled = out.pooler_output.reshape(len(images), -1)
        return [v[None, :] for v in pooled.cpu().numpy()]
