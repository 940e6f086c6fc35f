"""Mechanical billiards: n-centre potential, straight reflecting wall."""
