import numpy as np
import pytest

from learntrace.data import DatasetManifest, Interaction, LearnerSession, ManifestItem


def feature_manifest(num_items=60, num_classes=3, dim=2, seed=0, name="toyset"):
    """A feature-only dataset with Gaussian class clusters."""
    rng = np.random.default_rng(seed)
    if dim == 2:
        angles = np.linspace(0, 2 * np.pi, num_classes, endpoint=False)
        means = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    else:
        means = np.random.default_rng(seed + 1).normal(size=(num_classes, dim))
        means /= np.linalg.norm(means, axis=1, keepdims=True)
    items = []
    for i in range(num_items):
        label = (i % num_classes) + 1
        feat = means[label - 1] + rng.normal(scale=0.45, size=dim)
        items.append(
            ManifestItem(item_id=f"item_{i:04d}", label=label, features=[float(x) for x in feat])
        )
    return DatasetManifest(
        name=name,
        classes=[f"class_{c}" for c in range(1, num_classes + 1)],
        items=items,
        feature_names=[f"f{d}" for d in range(dim)],
    )


def make_session(manifest, learner_id="learner_0", seed=0, accuracy=0.7):
    """A structurally valid session with responses at roughly the given accuracy."""
    rng = np.random.default_rng(seed)
    ids = [it.item_id for it in manifest.items]
    picks = rng.choice(len(ids), size=45, replace=False)
    c = manifest.num_classes
    interactions = []
    for pos, k in enumerate(picks, start=1):
        item = manifest.items[k]
        if rng.uniform() < accuracy:
            top = item.label
        else:
            top = int(rng.choice([x for x in range(1, c + 1) if x != item.label]))
        rest = [x for x in range(1, c + 1) if x != top]
        rng.shuffle(rest)
        response = (top, rest[0], rest[1])
        interactions.append(
            Interaction(
                step=pos,
                item_id=item.item_id,
                true_label=item.label,
                response=response,
                phase="train" if pos <= 30 else "test",
            )
        )
    return LearnerSession(
        learner_id=learner_id, dataset=manifest.name, interactions=interactions, client_seed=seed
    )


@pytest.fixture
def toy_manifest():
    return feature_manifest()


@pytest.fixture
def toy_sessions(toy_manifest):
    return [make_session(toy_manifest, f"learner_{i}", seed=i) for i in range(8)]
