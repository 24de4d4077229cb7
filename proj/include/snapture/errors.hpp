#pragma once

#include <stdexcept>
#include <string>

namespace snapture {

// Every failure raised by the library derives from Error so callers can catch
// the whole family at a pipeline boundary.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define SNAPTURE_DEFINE_ERROR(Name)                                            \
  class Name : public Error {                                                  \
  public:                                                                      \
    using Error::Error;                                                        \
  }

// imaging
SNAPTURE_DEFINE_ERROR(InvalidChannelCount);
SNAPTURE_DEFINE_ERROR(DimensionMismatch);
SNAPTURE_DEFINE_ERROR(WindowTooLarge);
SNAPTURE_DEFINE_ERROR(InvalidRegion);
SNAPTURE_DEFINE_ERROR(ImageIoError);

// sequences / profiles / snapshots
SNAPTURE_DEFINE_ERROR(SequenceTooShort);
SNAPTURE_DEFINE_ERROR(EmptyCorpus);
SNAPTURE_DEFINE_ERROR(NoHandDetected);

// numerics
SNAPTURE_DEFINE_ERROR(ShapeError);
SNAPTURE_DEFINE_ERROR(DegenerateBatch);
SNAPTURE_DEFINE_ERROR(LabelOutOfRange);
SNAPTURE_DEFINE_ERROR(GraphStateError);
SNAPTURE_DEFINE_ERROR(CheckpointError);

// configuration / data
SNAPTURE_DEFINE_ERROR(ConfigError);
SNAPTURE_DEFINE_ERROR(IndexError);
SNAPTURE_DEFINE_ERROR(StratificationError);

#undef SNAPTURE_DEFINE_ERROR

class ManifestParseError : public Error {
public:
  ManifestParseError(std::size_t row, const std::string &what)
      : Error("manifest row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

private:
  std::size_t row_;
};

class TrainingDiverged : public Error {
public:
  explicit TrainingDiverged(int epoch, int trial = -1)
      : Error(message(epoch, trial)), epoch_(epoch), trial_(trial) {}
  int epoch() const noexcept { return epoch_; }
  int trial() const noexcept { return trial_; }

private:
  static std::string message(int epoch, int trial) {
    std::string m = "training diverged (non-finite loss) at epoch " + std::to_string(epoch);
    if (trial >= 0) m += " of trial " + std::to_string(trial);
    return m;
  }
  int epoch_;
  int trial_;
};

} // namespace snapture
