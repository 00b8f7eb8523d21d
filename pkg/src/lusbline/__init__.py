"""B-line detection in fan-shaped ultrasound-like videos.

Compares Cartesian and polar image representations for video-level
B-line classification and attention-based temporal localization, on
synthetically generated phantom clips.
"""

__version__ = "0.1.0"
