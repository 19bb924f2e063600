#pragma once

// Regression fixtures frozen from a reference run of the toy configuration.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <span>

namespace golden {

struct Fingerprint {
    double sum_abs = 0.0;
    double weighted = 0.0;  // sum of v * ((i % 7) - 3)
    double first = 0.0, last = 0.0;
};

inline Fingerprint fingerprint(std::span<const float> v) {
    Fingerprint f;
    for (std::size_t i = 0; i < v.size(); ++i) {
        f.sum_abs += std::fabs(v[i]);
        f.weighted += double(v[i]) * (double(i % 7) - 3.0);
    }
    if (!v.empty()) {
        f.first = v.front();
        f.last = v.back();
    }
    return f;
}

// SAC_DUMP_GOLDEN=1 prints fresh values for re-freezing.
inline void dump(const char* name, const Fingerprint& f) {
    if (std::getenv("SAC_DUMP_GOLDEN")) 
        std::printf("%s %.9g %.9g %.9g %.9g\n", name, f.sum_abs, f.weighted, f.first, f.last);
}

}  // namespace golden

#define GOLDEN_EMFORMER_SUM_ABS 545.791106
#define GOLDEN_EMFORMER_WEIGHTED -51.015901
#define GOLDEN_EMFORMER_FIRST 0.803291202
#define GOLDEN_EMFORMER_LAST -0.573915899
#define GOLDEN_WAVENET_SUM_ABS 85.7039603
#define GOLDEN_WAVENET_WEIGHTED 1.6295587
#define GOLDEN_WAVENET_FIRST -0.153270274
#define GOLDEN_WAVENET_LAST -0.258651793
#define GOLDEN_VOCODER_SUM_ABS 2556.21803
#define GOLDEN_VOCODER_WEIGHTED 2.90644157
#define GOLDEN_VOCODER_FIRST -0.670371234
#define GOLDEN_VOCODER_LAST -0.992367923
#define GOLDEN_PIPELINE_SUM_ABS 57415.1483
#define GOLDEN_PIPELINE_WEIGHTED -18.9056542
#define GOLDEN_PIPELINE_FIRST 0.135755002
#define GOLDEN_PIPELINE_LAST 0.236153498
