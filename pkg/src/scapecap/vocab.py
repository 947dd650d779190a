"""Closed vocabularies shared by every stage of the pipeline.

All per-clip vectors in the package use the orderings defined here.
"""

SCENES = ("public square", "park", "street traffic")

# Order of the 15 target audio events (manifest columns e1..e15).
EVENTS = (
    "Bird",
    "Animal",
    "Wind",
    "Water",
    "Natural sounds",
    "Vehicle",
    "Traffic",
    "Sounds of things",
    "Environment and background",
    "Outside, rural or natural",
    "Speech",
    "Human sounds",
    "Music",
    "Noise",
    "Silence",
)

# Affective-quality order used for manifests, model outputs and losses.
AQ_NAMES = (
    "pleasant",
    "eventful",
    "chaotic",
    "vibrant",
    "uneventful",
    "calm",
    "annoying",
    "monotonous",
)

N_SCENES = len(SCENES)
N_EVENTS = len(EVENTS)
N_AQ = len(AQ_NAMES)

AQ_INDEX = {name: i for i, name in enumerate(AQ_NAMES)}
SCENE_INDEX = {name: i for i, name in enumerate(SCENES)}
EVENT_INDEX = {name: i for i, name in enumerate(EVENTS)}

# Twelve task names in loss order.
TASKS = ("scene", "events", "isop", "isoe") + AQ_NAMES
