# WL Refinement Game
