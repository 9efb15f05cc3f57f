"""
pdam-risk - 对抗攻击损害概率评估系统
"""

__version__ = "1.0.0"
__author__ = "pdam-risk Team"
__description__ = "对抗攻击损害概率评估系统"
