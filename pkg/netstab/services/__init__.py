# Núcleo de netstab: expresiones, redes, transformaciones, espectro y simulación.
