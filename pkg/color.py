white = (0xFF, 0xFF, 0xFF)
black = (0x0, 0x0, 0x0)

axis = (0x40, 0x40, 0x40)
grid = (0xE0, 0xE0, 0xE0)
chance = (0xA0, 0xA0, 0xA0)
label_text = (0x20, 0x20, 0x20)

roc_curve = (0x20, 0xA0, 0xFF)
pr_curve = (0xBF, 0x5F, 0x0)
