#pragma once

// Embedded copy of data/crystals.json. tests/test_dispersion.cpp checks the two
// stay identical.

namespace ringtrace {

inline constexpr const char* kDefaultCrystalDatabase = R"json({
  "crystals": [
    {
      "id": "BBO",
      "symmetry": "uniaxial-negative",
      "form_id": "quadratic_pole",
      "valid_range_nm": [220, 1060],
      "source": "D. Eimerl, L. Davis, S. Velsko, E. K. Graham, A. Zalkin, J. Appl. Phys. 62, 1968 (1987)",
      "axes": {
        "o": [2.7405, 0.0184, 0.0179, 0.0155],
        "e": [2.3730, 0.0128, 0.0156, 0.0044]
      }
    },
    {
      "id": "BiBO",
      "symmetry": "biaxial-negative",
      "form_id": "quadratic_pole",
      "valid_range_nm": [300, 2600],
      "source": "H. Hellwig, J. Liebertz, L. Bohaty, J. Appl. Phys. 88, 240 (2000)",
      "axes": {
        "x": [3.0740, 0.0323, 0.0316, 0.01337],
        "y": [3.1685, 0.0373, 0.0346, 0.01750],
        "z": [3.6545, 0.0511, 0.0371, 0.0226]
      }
    },
    {
      "id": "BBO-Kato",
      "symmetry": "uniaxial-negative",
      "form_id": "quadratic_pole",
      "valid_range_nm": [220, 1060],
      "source": "K. Kato, IEEE J. Quantum Electron. QE-22, 1013 (1986)",
      "axes": {
        "o": [2.7359, 0.01878, 0.01822, 0.01354],
        "e": [2.3753, 0.01224, 0.01667, 0.01516]
      }
    },
    {
      "id": "BBO-Zhang",
      "symmetry": "uniaxial-negative",
      "form_id": "quadratic_pole_poly",
      "valid_range_nm": [220, 2500],
      "source": "D. Zhang, Y. Kong, J. Zhang, Opt. Commun. 184, 485 (2000)",
      "axes": {
        "o": [2.7359, 0.01878, 0.01822, 0.01471, 0.0006081, 0.00006740],
        "e": [2.3753, 0.01224, 0.01667, 0.01627, 0.0005716, 0.00006305]
      }
    },
    {
      "id": "BBO-Tamosauskas",
      "symmetry": "uniaxial-negative",
      "form_id": "sellmeier",
      "valid_range_nm": [220, 3000],
      "source": "G. Tamosauskas, G. Beresnevicius, D. Gadonas, A. Dubietis, Opt. Mater. Express 8, 1410 (2018)",
      "axes": {
        "o": [0.90291, 0.003926, 0.83155, 0.018786, 0.76536, 60.01],
        "e": [1.151075, 0.007142, 0.21803, 0.02259, 0.656, 263.0]
      }
    }
  ]
}
)json";

}  // namespace ringtrace
