#pragma once

#include <stdexcept>
#include <string>

namespace unicon {

// Bad user input: malformed config files, invalid CLI arguments, impossible
// dataset specs.  The CLI maps this family to exit code 2.
class config_error : public std::runtime_error {
public:
    explicit config_error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed data encountered while ingesting a CSV or checkpoint.
class data_error : public config_error {
public:
    explicit data_error(const std::string& what) : config_error(what) {}
};

// A precondition of the math was violated at runtime: labels with no
// out-of-class partner, anchors without positives, non-normalized or
// non-finite embeddings, zero-norm encoder outputs.
class domain_error : public std::runtime_error {
public:
    explicit domain_error(const std::string& what) : std::runtime_error(what) {}
};

// Training produced a non-finite loss or parameter.  Exit code 3.
class divergence_error : public std::runtime_error {
public:
    divergence_error(const std::string& what, int epoch, int step)
        : std::runtime_error(what), epoch(epoch), step(step) {}
    int epoch;
    int step;
};

}  // namespace unicon
