# SkewLab
