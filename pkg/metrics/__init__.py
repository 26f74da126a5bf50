# Trajectory metrics package
