"""Produce data/possum_predictions.csv.

Trains an AdaBoost regressor on the DAAG/openintro possum measurements and
writes its in-sample predictions next to the six anatomical features used
for the explanation run. The Rust pipeline treats the `y_pred` column as
the black-box model output.

Requires: pip install rdatasets scikit-learn pandas
"""

import pathlib

import rdatasets
from sklearn.ensemble import AdaBoostRegressor
from sklearn.metrics import mean_squared_error

FEATURES = ["hdlngth", "skullw", "footlgth", "earconch", "chest", "belly"]
TARGET = "totlngth"


def main() -> None:
    df = rdatasets.data("DAAG", "possum").dropna().reset_index(drop=True)
    X = df[FEATURES].to_numpy()
    y = df[TARGET].to_numpy()

    model = AdaBoostRegressor(n_estimators=50, random_state=0)
    model.fit(X, y)
    pred = model.predict(X)
    print(f"n={len(df)}  in-sample MSE={mean_squared_error(y, pred):.3f}")

    out = df[FEATURES].copy()
    out["y_pred"] = pred
    path = pathlib.Path(__file__).resolve().parent.parent / "data" / "possum_predictions.csv"
    out.to_csv(path, index=False, float_format="%.10g")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
