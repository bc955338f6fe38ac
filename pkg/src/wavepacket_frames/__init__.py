# Gaussian parabolic wavepacket frames - wavepacket-frames
