"""Scripted reproductions: region heatmaps, synthetic study, fairwashing, benchmark."""
