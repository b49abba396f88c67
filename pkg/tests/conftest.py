import numpy as np
import pytest

from symspot.config import RunConfig
from symspot.drawing import ClassDef, Drawing, GraphicalPrimitive

VOCAB2 = (ClassDef(0, "stuffy", False), ClassDef(1, "thingy", True))


def tiny_config(dim: int = 32, layers: int = 2, queries: int = 8, heads: int = 4) -> RunConfig:
    """Small but real config for fast model tests."""
    cfg = RunConfig()
    cfg.model.backbone.dim = dim
    cfg.model.backbone.levels = 3
    cfg.model.decoder.layers = layers
    cfg.model.decoder.heads = heads
    cfg.model.decoder.num_queries = queries
    cfg.model.decoder.ffn_dim = 2 * dim
    cfg.model.lfe.hidden_dim = 2 * dim
    cfg.optim.epochs = 2
    cfg.optim.batch_size = 4
    return cfg


def grid_drawing(n: int = 4, vocab=VOCAB2, num_layers: int = 2, seed: int = 0) -> Drawing:
    """n x n unit segments on a grid; half stuff, half thing instances."""
    rng = np.random.default_rng(seed)
    prims = []
    inst = 0
    for i in range(n):
        for j in range(n):
            x, y = 1.0 + 2 * i, 1.0 + 2 * j
            dx, dy = rng.uniform(0.4, 1.0, size=2)
            thing = (i + j) % 2 == 1
            prims.append(
                GraphicalPrimitive(
                    kind="segment",
                    geometry=(x, y, x + dx, y + dy),
                    layer=(i + j) % num_layers,
                    semantic=1 if thing else 0,
                    instance=inst if thing else -1,
                )
            )
            if thing:
                inst += 1
    return Drawing.build(
        id=f"grid{n}", width=2.0 * n + 1, height=2.0 * n + 1,
        num_layers=num_layers, class_vocab=vocab, primitives=prims,
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
