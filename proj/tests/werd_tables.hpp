#pragma once

// Published WER/WERD rows (percent) used to check the WERD arithmetic.
// Each row: factor, then (wer, werd) for tsrnet, nearest, linear.

#include <array>
#include <vector>

namespace tsr::testing {

struct WerdCell {
  double wer;
  double werd;
};

struct WerdRow {
  const char* table;
  const char* split;
  int factor;
  double reference;
  std::array<WerdCell, 3> cells;  // tsrnet, nearest, linear
};

inline const std::vector<WerdRow>& werd_rows() {
  static const std::vector<WerdRow> rows = [] {
    std::vector<WerdRow> r;
    // Continuous-sentence benchmark, dev and test columns.
    const double dev[8][6] = {{20.3, 0, 20.3, 0, 20.3, 0},         {20.7, 1.9, 21.8, 7.0, 22.9, 12.3},
                              {21.1, 3.8, 24.8, 21.1, 26.2, 27.4}, {23.4, 14.7, 26.3, 27.8, 29.5, 41.2},
                              {25.4, 23.8, 30.5, 45.1, 33.9, 57.0}, {28.2, 36.0, 33.5, 55.7, 38.3, 69.5},
                              {31.1, 47.4, 38.5, 70.0, 44.4, 81.7}, {35.3, 61.4, 43.8, 80.8, 51.1, -1}};
    const double test[8][6] = {{21.4, 0, 21.4, 0, 21.4, 0},         {21.5, 0.5, 22.3, 4.3, 23.4, 9.5},
                               {22.2, 3.8, 25.5, 19.3, 26.4, 23.4}, {24.7, 15.6, 27.4, 27.8, 30.3, 40.0},
                               {25.3, 18.4, 30.2, 39.6, 33.5, 52.0}, {28.9, 34.3, 33.9, 53.4, 38.4, 67.0},
                               {31.5, 44.7, 38.9, 68.3, 44.0, 79.2}, {34.9, 56.7, 43.4, 78.1, 50.3, 88.0}};
    for (int f = 0; f < 8; ++f) {
      r.push_back({"T1", "dev", f + 1, 20.3,
                   {WerdCell{dev[f][0], dev[f][1]}, WerdCell{dev[f][2], dev[f][3]}, WerdCell{dev[f][4], dev[f][5]}}});
      r.push_back({"T1", "test", f + 1, 21.4,
                   {WerdCell{test[f][0], test[f][1]}, WerdCell{test[f][2], test[f][3]},
                    WerdCell{test[f][4], test[f][5]}}});
    }
    // Isolated-sentence benchmark, test column only.
    const double csl[16][6] = {
        {0.7, 0, 0.7, 0, 0.7, 0},          {0.7, 0, 0.7, 0, 0.7, 0},          {0.7, 0, 0.8, 0.5, 0.8, 0.5},
        {0.7, 0, 0.9, 1.0, 0.9, 1.0},      {0.7, 0, 0.9, 1.0, 1.0, 1.4},      {0.8, 0.5, 1.3, 2.9, 1.4, 3.3},
        {0.9, 1.0, 1.8, 5.2, 2.1, 6.7},    {1.1, 1.9, 2.6, 9.0, 3.1, 11.4},   {1.5, 3.8, 3.6, 13.7, 4.6, 18.4},
        {1.9, 5.7, 5.4, 22.0, 6.9, 28.7},  {2.5, 8.6, 7.9, 32.6, 10.0, 41.6}, {3.8, 14.7, 11.1, 45.9, 13.6, 54.7},
        {5.1, 20.7, 14.4, 57.4, 17.0, 65.1}, {6.9, 28.7, 17.6, 66.7, 21.3, 75.4},
        {8.4, 35.1, 20.4, 73.5, 24.0, 80.3}, {10.3, 42.8, 24.0, 80.3, 28.3, 86.6}};
    for (int f = 0; f < 16; ++f)
      r.push_back({"T2", "test", f + 1, 0.7,
                   {WerdCell{csl[f][0], csl[f][1]}, WerdCell{csl[f][2], csl[f][3]}, WerdCell{csl[f][4], csl[f][5]}}});
    return r;
  }();
  return rows;
}

// werd < 0 marks the unreadable cell.
inline bool werd_cell_valid(const WerdCell& c) { return c.werd >= 0; }

}  // namespace tsr::testing
