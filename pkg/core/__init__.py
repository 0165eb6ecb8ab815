# Математические модули qdimer
