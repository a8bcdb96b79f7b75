"""
On-disk formats: binary arrays and masks, experiment configs, run manifests.
"""
