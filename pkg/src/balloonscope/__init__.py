"""Closed-loop simulator and control stack for a steerable balloon endoscope.

The package models a single-chamber balloon whose working-fluid volume is the
only actuated input.  Infused volume first deploys a roughly spherical optical
face and then, once the face is fully formed, bends the tip; a camera looking
through the optical face watches the dark working channel, and the fraction of
channel pixels in the image is the feedback signal for steering control.

Modules
-------
plant       syringe pump, volume-to-shape response, tool offset, tip pose
imaging     synthetic camera frames and the pixel-classification pipeline
estimation  pixel-ratio calibration, angle inversion, trace smoothing
control     bang-bang steering law and the closed-loop simulation
harness     canned validation experiments, metrics, requirement verdicts
service     live teleoperation loop behind a WebSocket endpoint
"""

from balloonscope.config import ConfigError, SimConfig, default_config, load_config
from balloonscope.control import ClosedLoopSim, Command, LoopConfig, Trace, bang_bang_rpm
from balloonscope.estimation import Calibration, estimate_angle, fit_calibration
from balloonscope.imaging import ChannelLostError, SceneModel, render_frame, sense
from balloonscope.plant import BalloonGeometry, PlantModel, ResponseCurve, tip_pose

__version__ = "0.1.0"

__all__ = [
    "BalloonGeometry",
    "Calibration",
    "ChannelLostError",
    "ClosedLoopSim",
    "Command",
    "ConfigError",
    "LoopConfig",
    "PlantModel",
    "ResponseCurve",
    "SceneModel",
    "SimConfig",
    "Trace",
    "bang_bang_rpm",
    "default_config",
    "estimate_angle",
    "fit_calibration",
    "load_config",
    "render_frame",
    "sense",
    "tip_pose",
]
