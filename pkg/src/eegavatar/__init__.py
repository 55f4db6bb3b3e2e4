"""Software re-creation of a tangible EEG avatar: synthetic EEG streams,
an ERD/ERS pipeline, a 402-LED virtual scalp display, the puppet wire
protocol and a companion-UI bridge."""

__version__ = "0.1.0"
