# oCSE network inference package
